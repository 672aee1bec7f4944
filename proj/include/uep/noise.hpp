#pragma once

// Simulated imperfect classifiers and the comparative analyses built on them.
//
// Every noise decision for a cell is drawn from rng::draw(seed, stream, cell),
// where stream = hash(image_id) ^ splitmix64(salt). The same seed therefore
// perturbs the same cells in the same direction under every partition and
// proxy combination (paired comparisons).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "uep/density.hpp"
#include "uep/error.hpp"
#include "uep/numeric.hpp"
#include "uep/partition.hpp"
#include "uep/proxy.hpp"
#include "uep/quantization.hpp"
#include "uep/rng.hpp"

namespace uep {

// Each cell leaves its class with probability p, moving one class up or down
// with equal chance. Boundary classes move inward with the full probability.
struct AdjacentFlip {
  double p = 0.1;
};

// Like AdjacentFlip, but the hop distance h >= 1 is geometric:
// P(h) = (1 - decay) * decay^(h - 1). Hops are clamped to the class range.
struct GeometricHop {
  double p = 0.1;
  double decay = 0.5;
};

struct NoiseModel {
  std::variant<AdjacentFlip, GeometricHop> kind = AdjacentFlip{};
  std::uint64_t seed = 0;

  double p() const noexcept {
    return std::visit([](const auto& k) { return k.p; }, kind);
  }

  void validate() const {
    const double prob = p();
    if (!(prob >= 0.0 && prob <= 1.0)) throw ParameterError("noise probability must lie in [0, 1]");
    if (const auto* g = std::get_if<GeometricHop>(&kind)) {
      if (!(g->decay > 0.0 && g->decay < 1.0)) {
        throw ParameterError("geometric hop decay must lie in (0, 1)");
      }
    }
  }
};

// "adjacent:P" or "geometric:P:DECAY".
inline NoiseModel parse_noise(std::string_view text, std::uint64_t seed = 0) {
  const auto fail = [&] {
    return ParameterError("noise spec '" + std::string(text) +
                          "' must be adjacent:P or geometric:P:DECAY");
  };
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw fail();
  const std::string_view kind = text.substr(0, colon);
  const std::string rest(text.substr(colon + 1));
  NoiseModel nm;
  nm.seed = seed;
  try {
    if (kind == "adjacent") {
      std::size_t used = 0;
      const double p = std::stod(rest, &used);
      if (used != rest.size()) throw fail();
      nm.kind = AdjacentFlip{p};
    } else if (kind == "geometric") {
      const auto c2 = rest.find(':');
      if (c2 == std::string::npos) throw fail();
      nm.kind = GeometricHop{std::stod(rest.substr(0, c2)), std::stod(rest.substr(c2 + 1))};
    } else {
      throw fail();
    }
  } catch (const std::logic_error&) {
    throw fail();
  }
  nm.validate();
  return nm;
}

inline std::string format_noise(const NoiseModel& nm) {
  if (const auto* a = std::get_if<AdjacentFlip>(&nm.kind)) return "adjacent:" + format_double(a->p);
  const auto& g = std::get<GeometricHop>(nm.kind);
  return "geometric:" + format_double(g.p) + ":" + format_double(g.decay);
}

inline std::uint64_t noise_stream(std::string_view image_id, std::uint64_t salt) noexcept {
  return rng::hash_string(image_id) ^ rng::splitmix64(salt);
}

// Applies the noise model cell by cell. `salt` separates independent noise
// streams (e.g. the two heads of an IPH pair).
inline ClassMap simulate_classifier(const ClassMap& truth, const NoiseModel& noise,
                                    std::uint64_t salt = 0) {
  noise.validate();
  ClassMap out = truth;
  if (truth.m < 2) return out;
  const auto top = static_cast<long>(truth.m - 1);
  const double p = noise.p();
  const std::uint64_t stream = noise_stream(truth.image_id, salt);
  auto cells = out.values.flat();
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const rng::Draw d = rng::draw(noise.seed, stream, k);
    if (!(d.first() < p)) continue;
    const long c = cells[k];
    long dir = (d.b >> 63) ? 1 : -1;
    if (c == 0) dir = 1;
    if (c == top) dir = -1;
    long hop = 1;
    if (const auto* g = std::get_if<GeometricHop>(&noise.kind)) {
      // Inverse-CDF geometric draw from the low 53 bits of the second word.
      const double u = 1.0 - static_cast<double>(d.b & ((1ULL << 53) - 1)) * 0x1.0p-53;
      hop = 1 + static_cast<long>(std::floor(std::log(u) / std::log(g->decay)));
    }
    cells[k] = static_cast<std::uint16_t>(std::clamp(c + dir * hop, 0L, top));
  }
  return out;
}

struct CountMetrics {
  double mae = 0.0;
  double mse = 0.0;  // root-mean-square, following the crowd-counting convention
};

// Image-level MAE and root-mean-square error of total counts.
inline CountMetrics evaluate_counts(std::span<const LocalCountMap> pred,
                                    std::span<const LocalCountMap> truth) {
  if (truth.empty()) throw DataError("evaluation needs at least one image");
  detail::check_maps_match(pred, truth, "evaluate_counts");
  CompensatedSum abs_sum, sq_sum;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double diff = detail::map_total(truth[i]) - detail::map_total(pred[i]);
    abs_sum.add(std::abs(diff));
    sq_sum.add(diff * diff);
  }
  const auto n = static_cast<double>(truth.size());
  return {abs_sum.value() / n, std::sqrt(sq_sum.value() / n)};
}

// Per-image outcome of one simulated run.
struct ImageResult {
  std::string image_id;
  double truth = 0.0;
  double predicted = 0.0;
  double discretization = 0.0;  // |sum(d - proxy(true class))|
  friend bool operator==(const ImageResult&, const ImageResult&) = default;
};

struct ComparisonCell {
  Strategy strategy = Strategy::uep;
  ProxyMethod method = ProxyMethod::mcp;
  bool feasible = true;
  std::string error;
  double mae = 0.0;
  double mse = 0.0;
  double discretization = 0.0;  // mean per-image discretization error
  double nl_cv = 0.0;           // CV of n_i * l_i over non-background training intervals
  std::vector<ImageResult> images;
  friend bool operator==(const ComparisonCell&, const ComparisonCell&) = default;
};

// Rows are partition strategies, columns proxy methods; cells stored row-major.
struct ComparisonMatrix {
  std::uint64_t seed = 0;
  std::string noise;
  std::size_t m = 0;
  std::vector<Strategy> strategies;
  std::vector<ProxyMethod> methods;
  std::vector<ComparisonCell> cells;

  const ComparisonCell& at(std::size_t row, std::size_t col) const {
    return cells.at(row * methods.size() + col);
  }
  const ComparisonCell* find(Strategy s, ProxyMethod pm) const {
    for (const auto& c : cells) {
      if (c.strategy == s && c.method == pm) return &c;
    }
    return nullptr;
  }
  friend bool operator==(const ComparisonMatrix&, const ComparisonMatrix&) = default;
};

// Recomputes MAE, MSE and mean discretization from a cell's per-image rows.
inline void summarize(ComparisonCell& cell) {
  if (cell.images.empty()) return;
  CompensatedSum abs_sum, sq_sum, disc_sum;
  for (const auto& im : cell.images) {
    const double diff = im.truth - im.predicted;
    abs_sum.add(std::abs(diff));
    sq_sum.add(diff * diff);
    disc_sum.add(im.discretization);
  }
  const auto n = static_cast<double>(cell.images.size());
  cell.mae = abs_sum.value() / n;
  cell.mse = std::sqrt(sq_sum.value() / n);
  cell.discretization = disc_sum.value() / n;
}

struct PartitionConfig {
  std::size_t m = 25;
  double t0 = 1.6e-4;
  std::optional<double> epsilon;  // UEP only; default 1e-6 * K * t_max
};

inline Partition fit_partition(Strategy s, const CountCollection& t, const PartitionConfig& cfg) {
  switch (s) {
    case Strategy::uep: return partition_uep(t, cfg.m, cfg.t0, cfg.epsilon).partition;
    case Strategy::uniform_len: return partition_uniform_len(t, cfg.m, cfg.t0);
    case Strategy::uniform_num: return partition_uniform_num(t, cfg.m, cfg.t0);
    case Strategy::explicit_borders: break;
  }
  throw ParameterError("explicit partitions cannot be fitted");
}

namespace detail {

inline ImageResult run_image(const LocalCountMap& truth, const Head& head, const NoiseModel& noise,
                             std::uint64_t salt = 0) {
  const ClassMap exact = encode_class_map(truth, head.partition);
  const ClassMap noisy = simulate_classifier(exact, noise, salt);
  const auto t = truth.values.flat();
  const auto c = noisy.values.flat();
  const auto e = exact.values.flat();
  CompensatedSum truth_sum, pred_sum, disc;
  for (std::size_t k = 0; k < t.size(); ++k) {
    truth_sum.add(t[k]);
    pred_sum.add(head.proxies.proxies[c[k]]);
    disc.add(t[k] - head.proxies.proxies[e[k]]);
  }
  return {truth.image_id, truth_sum.value(), pred_sum.value(), std::abs(disc.value())};
}

}  // namespace detail

// Fits every (strategy, proxy method) pair on the training counts, then
// encodes, perturbs and decodes the evaluation maps with the same noise seed.
inline ComparisonMatrix compare_strategies(const CountCollection& train,
                                           std::span<const LocalCountMap> eval,
                                           const PartitionConfig& cfg, const NoiseModel& noise,
                                           std::span<const Strategy> strategies,
                                           std::span<const ProxyMethod> methods,
                                           const ProxyOptions& opts = {}) {
  if (eval.empty()) throw DataError("comparison needs at least one evaluation image");
  noise.validate();
  ComparisonMatrix out;
  out.seed = noise.seed;
  out.noise = format_noise(noise);
  out.m = cfg.m;
  out.strategies.assign(strategies.begin(), strategies.end());
  out.methods.assign(methods.begin(), methods.end());
  for (Strategy s : strategies) {
    std::optional<Partition> part;
    std::string failure;
    try {
      part = fit_partition(s, train, cfg);
    } catch (const InfeasibleError& e) {
      failure = e.what();
    }
    for (ProxyMethod pm : methods) {
      ComparisonCell cell;
      cell.strategy = s;
      cell.method = pm;
      if (!part) {
        cell.feasible = false;
        cell.error = failure;
        out.cells.push_back(std::move(cell));
        continue;
      }
      cell.nl_cv = interval_stats(train, *part).nl_cv();
      const Head head{*part, compute_proxies(pm, train, *part, opts)};
      for (const auto& lc : eval) cell.images.push_back(detail::run_image(lc, head, noise));
      summarize(cell);
      out.cells.push_back(std::move(cell));
    }
  }
  return out;
}

struct IphAblationOptions {
  bool interleaved = true;    // false: head1 duplicates head0 (parallel heads)
  bool shared_noise = false;  // true: both heads draw from the same noise stream
};

struct IphAblationReport {
  std::uint64_t seed = 0;
  double single_mae = 0.0;
  double single_mse = 0.0;
  double iph_mae = 0.0;
  double iph_mse = 0.0;
  // Fractions of evaluation cells by which heads classified them correctly.
  double both_correct = 0.0;
  double head0_only = 0.0;
  double head1_only = 0.0;
  double neither = 0.0;
  std::vector<ImageResult> single_images;
  std::vector<ImageResult> iph_images;
};

// Single-head UEP + MCP against the interleaved pair derived from it.
inline IphAblationReport iph_ablation(const CountCollection& train,
                                      std::span<const LocalCountMap> eval,
                                      const PartitionConfig& cfg, const NoiseModel& noise,
                                      const IphAblationOptions& ablation = {},
                                      const ProxyOptions& opts = {}) {
  if (eval.empty()) throw DataError("IPH ablation needs at least one evaluation image");
  noise.validate();
  const Partition p0 = partition_uep(train, cfg.m, cfg.t0, cfg.epsilon).partition;
  const Head head0{p0, compute_mcp(train, p0, opts)};
  const IphPair pair =
      ablation.interleaved ? derive_iph(train, head0, opts) : IphPair{head0, head0};
  const std::uint64_t salt1 = ablation.shared_noise ? 0 : 1;

  IphAblationReport r;
  r.seed = noise.seed;
  std::size_t cells = 0, both = 0, only0 = 0, only1 = 0, none = 0;
  for (const auto& lc : eval) {
    const ClassMap e0 = encode_class_map(lc, pair.head0.partition);
    const ClassMap e1 = encode_class_map(lc, pair.head1.partition);
    const ClassMap n0 = simulate_classifier(e0, noise, 0);
    const ClassMap n1 = simulate_classifier(e1, noise, salt1);
    const LocalCountMap single = decode_count_map(n0, pair.head0.proxies, lc.patch_size);
    const LocalCountMap averaged = decode_iph(n0, n1, pair, lc.patch_size);
    const double truth = detail::map_total(lc);
    r.single_images.push_back({lc.image_id, truth, detail::map_total(single), 0.0});
    r.iph_images.push_back({lc.image_id, truth, detail::map_total(averaged), 0.0});
    for (std::size_t k = 0; k < e0.values.size(); ++k) {
      const bool ok0 = e0.values.flat()[k] == n0.values.flat()[k];
      const bool ok1 = e1.values.flat()[k] == n1.values.flat()[k];
      ++cells;
      if (ok0 && ok1)
        ++both;
      else if (ok0)
        ++only0;
      else if (ok1)
        ++only1;
      else
        ++none;
    }
  }
  ComparisonCell single_cell, iph_cell;
  single_cell.images = r.single_images;
  iph_cell.images = r.iph_images;
  summarize(single_cell);
  summarize(iph_cell);
  r.single_mae = single_cell.mae;
  r.single_mse = single_cell.mse;
  r.iph_mae = iph_cell.mae;
  r.iph_mse = iph_cell.mse;
  const auto total = static_cast<double>(cells);
  if (cells) {
    r.both_correct = static_cast<double>(both) / total;
    r.head0_only = static_cast<double>(only0) / total;
    r.head1_only = static_cast<double>(only1) / total;
    r.neither = static_cast<double>(none) / total;
  }
  return r;
}

}  // namespace uep
