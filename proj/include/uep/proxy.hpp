#pragma once

// Count proxies: the value decoded for every patch classified into an interval.

#include <string>
#include <string_view>
#include <vector>

#include "uep/density.hpp"
#include "uep/error.hpp"
#include "uep/numeric.hpp"
#include "uep/partition.hpp"

namespace uep {

enum class ProxyMethod { mcp, midpoint, sample_median };

inline std::string_view to_string(ProxyMethod m) noexcept {
  switch (m) {
    case ProxyMethod::mcp: return "mcp";
    case ProxyMethod::midpoint: return "midpoint";
    case ProxyMethod::sample_median: return "sample-median";
  }
  return "mcp";
}

inline ProxyMethod parse_proxy_method(std::string_view name) {
  if (name == "mcp") return ProxyMethod::mcp;
  if (name == "midpoint") return ProxyMethod::midpoint;
  if (name == "sample-median") return ProxyMethod::sample_median;
  throw ParameterError("unknown proxy method '" + std::string(name) + "'");
}

inline bool is_proxy_method(std::string_view name) noexcept {
  return name == "mcp" || name == "midpoint" || name == "sample-median";
}

struct ProxyTable {
  ProxyMethod method = ProxyMethod::mcp;
  std::vector<double> proxies;
  std::vector<bool> empty_flags;  // interval had no member counts; proxy is its midpoint

  std::size_t size() const noexcept { return proxies.size(); }
  friend bool operator==(const ProxyTable&, const ProxyTable&) = default;
};

struct ProxyOptions {
  bool background_zero = false;  // force the background proxy to 0.0
};

namespace detail {

inline std::vector<std::vector<double>> members_by_interval(const CountCollection& t,
                                                            const Partition& p) {
  std::vector<std::vector<double>> members(p.m());
  for (double x : t.counts()) members[p.interval_of(x)].push_back(x);
  return members;
}

inline void apply_background_option(ProxyTable& table, const ProxyOptions& opts) {
  if (opts.background_zero) {
    table.proxies[0] = 0.0;
    table.empty_flags[0] = false;
  }
}

}  // namespace detail

// Mean count proxies: delta_i is the mean of interval i's member counts.
inline ProxyTable compute_mcp(const CountCollection& t, const Partition& p,
                              const ProxyOptions& opts = {}) {
  const std::size_t m = p.m();
  std::vector<CompensatedSum> sums(m);
  std::vector<std::size_t> counts(m, 0);
  for (double x : t.counts()) {
    const std::size_t i = p.interval_of(x);
    sums[i].add(x);
    ++counts[i];
  }
  ProxyTable out{ProxyMethod::mcp, std::vector<double>(m), std::vector<bool>(m, false)};
  for (std::size_t i = 0; i < m; ++i) {
    if (counts[i] == 0) {
      out.proxies[i] = (p.lower(i) + p.upper(i)) / 2.0;
      out.empty_flags[i] = true;
    } else {
      out.proxies[i] = sums[i].value() / static_cast<double>(counts[i]);
    }
  }
  detail::apply_background_option(out, opts);
  return out;
}

inline ProxyTable compute_midpoint_proxies(const Partition& p, const ProxyOptions& opts = {}) {
  const std::size_t m = p.m();
  ProxyTable out{ProxyMethod::midpoint, std::vector<double>(m), std::vector<bool>(m, false)};
  for (std::size_t i = 0; i < m; ++i) out.proxies[i] = (p.lower(i) + p.upper(i)) / 2.0;
  detail::apply_background_option(out, opts);
  return out;
}

// Even-sized groups take the mean of the two middle members.
inline ProxyTable compute_sample_median_proxies(const CountCollection& t, const Partition& p,
                                                const ProxyOptions& opts = {}) {
  const auto members = detail::members_by_interval(t, p);
  const std::size_t m = p.m();
  ProxyTable out{ProxyMethod::sample_median, std::vector<double>(m), std::vector<bool>(m, false)};
  for (std::size_t i = 0; i < m; ++i) {
    const auto& xs = members[i];  // ascending: t is sorted
    if (xs.empty()) {
      out.proxies[i] = (p.lower(i) + p.upper(i)) / 2.0;
      out.empty_flags[i] = true;
    } else if (xs.size() % 2 == 1) {
      out.proxies[i] = xs[xs.size() / 2];
    } else {
      out.proxies[i] = (xs[xs.size() / 2 - 1] + xs[xs.size() / 2]) / 2.0;
    }
  }
  detail::apply_background_option(out, opts);
  return out;
}

inline ProxyTable compute_proxies(ProxyMethod method, const CountCollection& t, const Partition& p,
                                  const ProxyOptions& opts = {}) {
  switch (method) {
    case ProxyMethod::mcp: return compute_mcp(t, p, opts);
    case ProxyMethod::midpoint: return compute_midpoint_proxies(p, opts);
    case ProxyMethod::sample_median: return compute_sample_median_proxies(t, p, opts);
  }
  return compute_mcp(t, p, opts);
}

// A classification head: its interval partition and decode table.
struct Head {
  Partition partition;
  ProxyTable proxies;
  friend bool operator==(const Head&, const Head&) = default;
};

// Interleaved prediction heads. head1's interior borders are head0's
// non-background proxies, so head1 has m + 1 intervals.
struct IphPair {
  Head head0;
  Head head1;
  friend bool operator==(const IphPair&, const IphPair&) = default;
};

inline IphPair derive_iph(const CountCollection& t, const Head& head0,
                          const ProxyOptions& opts = {}) {
  const Partition& p0 = head0.partition;
  const auto& d0 = head0.proxies.proxies;
  if (d0.size() != p0.m()) {
    throw DataError("head0 proxy table has " + std::to_string(d0.size()) +
                    " entries for a partition of " + std::to_string(p0.m()) + " intervals");
  }
  std::vector<double> borders{0.0, p0.t0()};
  for (std::size_t i = 1; i < p0.m(); ++i) {
    if (!(d0[i] > p0.lower(i) && d0[i] < p0.upper(i))) {
      throw InfeasibleError("IPH derivation: head0 proxy " + std::to_string(i) + " (" +
                            std::to_string(d0[i]) + ") is not strictly inside its interval [" +
                            std::to_string(p0.lower(i)) + ", " + std::to_string(p0.upper(i)) + "]");
    }
    borders.push_back(d0[i]);
  }
  borders.push_back(p0.t_max());
  for (std::size_t i = 1; i < borders.size(); ++i) {
    if (!(borders[i] > borders[i - 1])) {
      throw InfeasibleError("IPH derivation: head1 borders " + std::to_string(i - 1) + " (" +
                            std::to_string(borders[i - 1]) + ") and " + std::to_string(i) + " (" +
                            std::to_string(borders[i]) + ") collide");
    }
  }
  Partition p1(std::move(borders), Strategy::explicit_borders);
  ProxyTable d1 = compute_mcp(t, p1, opts);
  return {head0, Head{std::move(p1), std::move(d1)}};
}

}  // namespace uep
