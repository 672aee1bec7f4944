#pragma once

// Count-interval partitions: the UEP binary interval partition and the
// equal-length / equal-count baselines.
//
// A partition with m intervals has borders b_0 = 0 < b_1 = t0 < ... < b_m = t_max.
// Interval i is [b_i, b_{i+1}) except the last, which is closed. Interval 0 is
// the background class.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uep/density.hpp"
#include "uep/error.hpp"
#include "uep/numeric.hpp"

namespace uep {

enum class Strategy { uep, uniform_len, uniform_num, explicit_borders };

inline std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::uep: return "uep";
    case Strategy::uniform_len: return "uniform-len";
    case Strategy::uniform_num: return "uniform-num";
    case Strategy::explicit_borders: return "explicit";
  }
  return "explicit";
}

inline Strategy parse_strategy(std::string_view name) {
  if (name == "uep") return Strategy::uep;
  if (name == "uniform-len") return Strategy::uniform_len;
  if (name == "uniform-num") return Strategy::uniform_num;
  if (name == "explicit") return Strategy::explicit_borders;
  throw ParameterError("unknown partition strategy '" + std::string(name) + "'");
}

// Binary-search metadata kept alongside UEP partitions.
struct SearchInfo {
  double epsilon = 0.0;
  double final_l_bar = 0.0;
  friend bool operator==(const SearchInfo&, const SearchInfo&) = default;
};

class Partition {
 public:
  // Throws DataError unless borders = [0, t0, ..., t_max] strictly ascend with m >= 2.
  explicit Partition(std::vector<double> borders, Strategy strategy = Strategy::explicit_borders,
                     std::optional<SearchInfo> search = std::nullopt)
      : borders_(std::move(borders)), strategy_(strategy), search_(search) {
    if (borders_.size() < 3) {
      throw DataError("a partition needs at least 3 borders (m >= 2), got " +
                      std::to_string(borders_.size()));
    }
    if (borders_.front() != 0.0) throw DataError("the first partition border must be 0");
    for (std::size_t i = 0; i < borders_.size(); ++i) {
      if (!std::isfinite(borders_[i])) throw DataError("partition borders must be finite");
      if (i > 0 && !(borders_[i] > borders_[i - 1])) {
        throw DataError("partition borders must strictly ascend (border " + std::to_string(i) +
                        ")");
      }
    }
  }

  std::size_t m() const noexcept { return borders_.size() - 1; }
  double t0() const noexcept { return borders_[1]; }
  double t_max() const noexcept { return borders_.back(); }
  std::span<const double> borders() const noexcept { return borders_; }
  Strategy strategy() const noexcept { return strategy_; }
  const std::optional<SearchInfo>& search() const noexcept { return search_; }

  double lower(std::size_t i) const { return borders_[i]; }
  double upper(std::size_t i) const { return borders_[i + 1]; }
  double length(std::size_t i) const { return borders_[i + 1] - borders_[i]; }

  // Interval index of a non-negative count; counts above t_max land in the last interval.
  std::size_t interval_of(double x) const noexcept {
    const auto it = std::upper_bound(borders_.begin(), borders_.end(), x);
    const auto idx = static_cast<std::size_t>(it - borders_.begin());
    if (idx == 0) return 0;
    return std::min(idx - 1, m() - 1);
  }

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<double> borders_;
  Strategy strategy_;
  std::optional<SearchInfo> search_;
};

// Output of one greedy pass. `last_border` and `tail_count` describe the
// still-open final interval (p and n when the loop ends).
struct SweepResult {
  std::vector<double> endpoints;
  double last_border = 0.0;
  std::size_t tail_count = 0;
};

// One pass of the inner loop of the binary interval partition over counts
// already filtered to >= t0 and sorted ascending.
inline SweepResult greedy_sweep(std::span<const double> filtered, double t0, double l_bar) {
  if (!(t0 > 0.0)) throw ParameterError("t0 must be positive");
  if (!(l_bar > 0.0)) throw ParameterError("target n*l product must be positive");
  if (filtered.empty()) throw InfeasibleError("no local counts at or above t0");
  SweepResult out;
  out.endpoints.push_back(t0);
  double p = t0;
  std::size_t n = 0;
  for (double d : filtered) {
    ++n;
    if ((d - p) * static_cast<double>(n) > l_bar) {
      n = 0;
      p = d;
      out.endpoints.push_back(p);
    }
  }
  out.last_border = p;
  out.tail_count = n;
  return out;
}

// State of the binary search over the target product l_bar.
struct BipSearchState {
  double low = 0.0;
  double high = 0.0;
  double l_bar = 0.0;  // target whose sweep produced the returned borders
  double epsilon = 0.0;
  int iterations = 0;
};

struct UepResult {
  Partition partition;
  BipSearchState state;
};

inline constexpr int kMaxBipIterations = 200;

namespace detail {

inline std::size_t count_distinct(std::span<const double> sorted) noexcept {
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i == 0 || sorted[i] != sorted[i - 1]) ++distinct;
  }
  return distinct;
}

// A sweep describes an m-interval partition when it yields m-1 endpoints below
// t_max, or m endpoints the last of which is t_max itself.
inline bool yields_m_intervals(const SweepResult& s, std::size_t m, double t_max) noexcept {
  const std::size_t n = s.endpoints.size();
  return (n == m - 1 && s.endpoints.back() < t_max) || (n == m && s.endpoints.back() == t_max);
}

inline std::vector<double> assemble_borders(const std::vector<double>& endpoints, double t_max) {
  std::vector<double> borders{0.0};
  borders.insert(borders.end(), endpoints.begin(), endpoints.end());
  if (borders.back() == t_max) borders.pop_back();
  borders.push_back(t_max);
  return borders;
}

}  // namespace detail

// Binary interval partition under the uniform-error criterion.
//
// Searches the target product l_bar in [low, high] until high - low <= epsilon,
// moving low up when the sweep closes too many intervals (or the open tail
// interval still exceeds l_bar) and high down otherwise. The returned borders
// come from the sweep at the final high bound when that sweep yields exactly m
// intervals, else the final low bound, else the last such sweep seen.
//
// Defaults: search range [0, (t_max - t0) * K_filtered]; epsilon 1e-6 * K * t_max.
inline UepResult partition_uep(const CountCollection& t, std::size_t m, double t0,
                               std::optional<double> epsilon = std::nullopt,
                               std::optional<std::pair<double, double>> search = std::nullopt) {
  if (m < 2) throw ParameterError("interval count m must be >= 2");
  if (!(t0 > 0.0)) throw ParameterError("t0 must be positive");
  const auto filtered = t.at_least(t0);
  const std::size_t distinct = detail::count_distinct(filtered);
  if (distinct < m - 1) {
    throw InfeasibleError("UEP partition with m = " + std::to_string(m) + " needs at least " +
                          std::to_string(m - 1) + " distinct counts >= t0, found " +
                          std::to_string(distinct) + " (deficit " +
                          std::to_string(m - 1 - distinct) + ")");
  }
  const double t_max = t.t_max();
  if (!(t_max > t0)) {
    throw InfeasibleError("t_max must exceed t0 for a UEP partition");
  }

  BipSearchState st;
  if (search) {
    st.low = search->first;
    st.high = search->second;
  } else {
    st.low = 0.0;
    st.high = (t_max - t0) * static_cast<double>(filtered.size());
  }
  if (!(st.low < st.high) || st.low < 0.0) {
    throw ParameterError("UEP search range needs 0 <= L < H");
  }
  st.epsilon = epsilon.value_or(1e-6 * static_cast<double>(t.size()) * t_max);
  if (!(st.epsilon > 0.0)) throw ParameterError("epsilon must be positive");

  std::optional<std::pair<double, SweepResult>> last_valid;
  while (st.high - st.low > st.epsilon) {
    if (st.iterations == kMaxBipIterations) {
      throw ParameterError("UEP binary search did not reach tolerance " +
                           std::to_string(st.epsilon) + " within " +
                           std::to_string(kMaxBipIterations) + " iterations");
    }
    const double l_bar = (st.low + st.high) / 2.0;
    SweepResult s = greedy_sweep(filtered, t0, l_bar);
    ++st.iterations;
    const std::size_t count = s.endpoints.size();
    if (count >= m) {
      st.low = l_bar;
    } else if (count == m - 1) {
      if ((t_max - s.last_border) * static_cast<double>(s.tail_count) > l_bar) {
        st.low = l_bar;
      } else {
        st.high = l_bar;
      }
    } else {
      st.high = l_bar;
    }
    if (detail::yields_m_intervals(s, m, t_max)) last_valid.emplace(l_bar, std::move(s));
  }

  std::optional<std::pair<double, SweepResult>> chosen;
  for (double bound : {st.high, st.low}) {
    if (!(bound > 0.0)) continue;
    SweepResult s = greedy_sweep(filtered, t0, bound);
    if (detail::yields_m_intervals(s, m, t_max)) {
      chosen.emplace(bound, std::move(s));
      break;
    }
  }
  if (!chosen) chosen = std::move(last_valid);
  if (!chosen) {
    throw InfeasibleError("UEP binary search found no target product giving exactly " +
                          std::to_string(m) + " intervals");
  }
  st.l_bar = chosen->first;
  Partition p(detail::assemble_borders(chosen->second.endpoints, t_max), Strategy::uep,
              SearchInfo{st.epsilon, st.l_bar});
  return {std::move(p), st};
}

// m-1 equal-length intervals over [t0, t_max] plus the background.
inline Partition partition_uniform_len(const CountCollection& t, std::size_t m, double t0) {
  if (m < 2) throw ParameterError("interval count m must be >= 2");
  if (!(t0 > 0.0)) throw ParameterError("t0 must be positive");
  const double t_max = t.t_max();
  if (!(t_max > t0)) throw InfeasibleError("uniform-length partition needs t_max > t0");
  const double step = (t_max - t0) / static_cast<double>(m - 1);
  std::vector<double> borders{0.0, t0};
  for (std::size_t i = 1; i + 1 < m; ++i) borders.push_back(t0 + static_cast<double>(i) * step);
  borders.push_back(t_max);
  try {
    return Partition(std::move(borders), Strategy::uniform_len);
  } catch (const DataError& e) {
    throw InfeasibleError(std::string("uniform-length partition: ") + e.what());
  }
}

// m-1 groups of the filtered counts, as equal in size as possible with the
// remainder on the earliest groups. A group's left border is its first sample.
inline Partition partition_uniform_num(const CountCollection& t, std::size_t m, double t0) {
  if (m < 2) throw ParameterError("interval count m must be >= 2");
  if (!(t0 > 0.0)) throw ParameterError("t0 must be positive");
  const auto filtered = t.at_least(t0);
  const std::size_t groups = m - 1;
  if (filtered.size() < groups) {
    throw InfeasibleError("uniform-count partition needs at least " + std::to_string(groups) +
                          " counts >= t0, found " + std::to_string(filtered.size()));
  }
  const std::size_t base = filtered.size() / groups;
  const std::size_t rem = filtered.size() % groups;
  std::vector<double> borders{0.0, t0};
  std::size_t start = 0;
  for (std::size_t g = 0; g + 1 < groups; ++g) {
    start += base + (g < rem ? 1 : 0);
    borders.push_back(filtered[start]);
  }
  borders.push_back(t.t_max());
  for (std::size_t i = 1; i < borders.size(); ++i) {
    if (!(borders[i] > borders[i - 1])) {
      throw InfeasibleError("uniform-count partition: borders " + std::to_string(i - 1) + " and " +
                            std::to_string(i) + " coincide at " + std::to_string(borders[i]));
    }
  }
  return Partition(std::move(borders), Strategy::uniform_num);
}

struct IntervalStat {
  std::size_t n = 0;
  double length = 0.0;
  double nl = 0.0;
  double sum = 0.0;
  double mean = 0.0;  // only meaningful when n > 0
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  bool empty() const noexcept { return n == 0; }
};

struct IntervalStats {
  std::vector<IntervalStat> intervals;

  std::size_t total() const noexcept {
    std::size_t k = 0;
    for (const auto& s : intervals) k += s.n;
    return k;
  }

  // Coefficient of variation of n_i * l_i over the non-background intervals.
  double nl_cv() const {
    std::vector<double> nl;
    for (std::size_t i = 1; i < intervals.size(); ++i) nl.push_back(intervals[i].nl);
    return coefficient_of_variation(nl);
  }
};

inline IntervalStats interval_stats(const CountCollection& t, const Partition& p) {
  const std::size_t m = p.m();
  IntervalStats out;
  out.intervals.resize(m);
  std::vector<CompensatedSum> sums(m);
  for (double x : t.counts()) {
    if (x > p.t_max()) {
      throw std::logic_error("interval_stats: count exceeds the partition's t_max");
    }
    const std::size_t i = p.interval_of(x);
    IntervalStat& s = out.intervals[i];
    if (s.n == 0) {
      s.min = x;
      s.max = x;
    } else {
      s.min = std::min(s.min, x);
      s.max = std::max(s.max, x);
    }
    ++s.n;
    sums[i].add(x);
  }
  for (std::size_t i = 0; i < m; ++i) {
    IntervalStat& s = out.intervals[i];
    s.length = p.length(i);
    s.nl = static_cast<double>(s.n) * s.length;
    s.sum = sums[i].value();
    if (s.n > 0) s.mean = s.sum / static_cast<double>(s.n);
  }
  return out;
}

}  // namespace uep
