#pragma once

// Encoding local counts into interval classes, decoding classes back into
// counts, and the error bookkeeping around both.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "uep/density.hpp"
#include "uep/error.hpp"
#include "uep/grid.hpp"
#include "uep/numeric.hpp"
#include "uep/partition.hpp"
#include "uep/proxy.hpp"

namespace uep {

struct ClassMap {
  std::string image_id;
  std::size_t m = 0;
  Grid<std::uint16_t> values;
  friend bool operator==(const ClassMap&, const ClassMap&) = default;
};

inline constexpr std::size_t kMaxClasses = std::numeric_limits<std::uint16_t>::max();

struct EncodeStats {
  std::size_t clamped = 0;  // counts above t_max folded into the last class
};

inline ClassMap encode_class_map(const LocalCountMap& lc, const Partition& p,
                                 EncodeStats* stats = nullptr) {
  if (p.m() > kMaxClasses) throw ParameterError("too many intervals for a 16-bit class map");
  ClassMap out{lc.image_id, p.m(), Grid<std::uint16_t>(lc.values.rows(), lc.values.cols(), 0)};
  const auto in = lc.values.flat();
  auto dst = out.values.flat();
  for (std::size_t k = 0; k < in.size(); ++k) {
    const double x = in[k];
    if (!(x >= 0.0)) {
      throw DataError("image '" + lc.image_id + "': negative or NaN local count at cell " +
                      std::to_string(k));
    }
    if (x > p.t_max() && stats) ++stats->clamped;
    dst[k] = static_cast<std::uint16_t>(p.interval_of(x));
  }
  return out;
}

namespace detail {

inline void check_monotone(const ProxyTable& proxies) {
  for (std::size_t i = 1; i < proxies.size(); ++i) {
    if (proxies.proxies[i] < proxies.proxies[i - 1]) {
      throw DataError("proxy table is not monotone at interval " + std::to_string(i));
    }
  }
}

}  // namespace detail

inline LocalCountMap decode_count_map(const ClassMap& c, const ProxyTable& proxies,
                                      int patch_size = 1) {
  detail::check_monotone(proxies);
  LocalCountMap out{c.image_id, patch_size, Grid<double>(c.values.rows(), c.values.cols(), 0.0)};
  const auto in = c.values.flat();
  auto dst = out.values.flat();
  for (std::size_t k = 0; k < in.size(); ++k) {
    if (in[k] >= proxies.size()) {
      throw DataError("image '" + c.image_id + "': class " + std::to_string(in[k]) + " at cell " +
                      std::to_string(k) + " is outside a " + std::to_string(proxies.size()) +
                      "-entry proxy table");
    }
    dst[k] = proxies.proxies[in[k]];
  }
  return out;
}

// Cell-wise mean of the two heads' decoded counts.
inline LocalCountMap decode_iph(const ClassMap& c0, const ClassMap& c1, const IphPair& pair,
                                int patch_size = 1) {
  if (!c0.values.same_shape(c1.values)) {
    throw DataError("IPH decode: head class maps of image '" + c0.image_id + "' differ in shape");
  }
  LocalCountMap a = decode_count_map(c0, pair.head0.proxies, patch_size);
  const LocalCountMap b = decode_count_map(c1, pair.head1.proxies, patch_size);
  auto dst = a.values.flat();
  const auto src = b.values.flat();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = (dst[k] + src[k]) / 2.0;
  return a;
}

struct ImageError {
  std::string image_id;
  double truth = 0.0;
  double predicted = 0.0;
  double signed_diff = 0.0;  // truth - predicted
  double abs_error = 0.0;
  friend bool operator==(const ImageError&, const ImageError&) = default;
};

// Per true interval. Signed sums are truth - prediction except `misclass_signed`,
// which is prediction - proxy(true class): the misclassification cost, so a
// single cell sent from i to j contributes delta_j - delta_i.
struct IntervalError {
  std::size_t n = 0;
  double length = 0.0;
  double nl = 0.0;
  double signed_sum = 0.0;
  double abs_sum = 0.0;
  double class_mae = 0.0;
  double discretization_signed = 0.0;  // sum of (d - proxy(true class))
  double misclass_signed = 0.0;
  friend bool operator==(const IntervalError&, const IntervalError&) = default;
};

struct ErrorReport {
  std::vector<ImageError> images;
  std::vector<IntervalError> intervals;
  double mae = 0.0;           // mean of per-image absolute errors
  double mse = 0.0;           // root of mean squared per-image error
  double total_signed = 0.0;  // sum of per-image signed differences
  double pooled_abs = 0.0;    // |total_signed|: all images pooled as one
  std::size_t clamped = 0;
  friend bool operator==(const ErrorReport&, const ErrorReport&) = default;
};

// Recomputes aggregate fields from the per-image rows (sorted by image id).
inline void summarize(ErrorReport& r) {
  std::stable_sort(r.images.begin(), r.images.end(), [](const ImageError& a, const ImageError& b) {
    return a.image_id < b.image_id;
  });
  CompensatedSum abs_sum;
  CompensatedSum sq_sum;
  CompensatedSum signed_sum;
  for (const auto& im : r.images) {
    abs_sum.add(im.abs_error);
    sq_sum.add(im.signed_diff * im.signed_diff);
    signed_sum.add(im.signed_diff);
  }
  const auto n = static_cast<double>(r.images.size());
  r.mae = r.images.empty() ? 0.0 : abs_sum.value() / n;
  r.mse = r.images.empty() ? 0.0 : std::sqrt(sq_sum.value() / n);
  r.total_signed = signed_sum.value();
  r.pooled_abs = std::abs(r.total_signed);
}

namespace detail {

inline double map_total(const LocalCountMap& m) { return accurate_sum(m.values.flat()); }

inline void check_maps_match(std::span<const LocalCountMap> a, std::span<const LocalCountMap> b,
                             const char* what) {
  if (a.size() != b.size()) {
    throw DataError(std::string(what) + ": " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + " images");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].image_id != b[i].image_id) {
      throw DataError(std::string(what) + ": image '" + a[i].image_id + "' paired with '" +
                      b[i].image_id + "'");
    }
    if (!a[i].values.same_shape(b[i].values)) {
      throw DataError(std::string(what) + ": shape mismatch for image '" + a[i].image_id + "'");
    }
  }
}

}  // namespace detail

// Groups cells by true interval and compares predicted counts against truth.
inline ErrorReport error_decomposition(std::span<const LocalCountMap> predicted,
                                       std::span<const LocalCountMap> truth, const Partition& p,
                                       const ProxyTable& proxies) {
  detail::check_maps_match(predicted, truth, "error decomposition");
  if (proxies.size() != p.m()) throw DataError("proxy table does not match the partition");
  const std::size_t m = p.m();
  ErrorReport r;
  r.intervals.resize(m);
  std::vector<CompensatedSum> signed_sums(m), abs_sums(m), disc(m), mis(m);
  for (std::size_t img = 0; img < truth.size(); ++img) {
    const auto t = truth[img].values.flat();
    const auto q = predicted[img].values.flat();
    CompensatedSum truth_sum, pred_sum;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (!(t[k] >= 0.0)) {
        throw DataError("image '" + truth[img].image_id + "': negative local count");
      }
      if (t[k] > p.t_max()) ++r.clamped;
      const std::size_t i = p.interval_of(t[k]);
      const double delta = proxies.proxies[i];
      ++r.intervals[i].n;
      signed_sums[i].add(t[k] - q[k]);
      abs_sums[i].add(std::abs(t[k] - q[k]));
      disc[i].add(t[k] - delta);
      mis[i].add(q[k] - delta);
      truth_sum.add(t[k]);
      pred_sum.add(q[k]);
    }
    ImageError e{truth[img].image_id, truth_sum.value(), pred_sum.value(), 0.0, 0.0};
    e.signed_diff = e.truth - e.predicted;
    e.abs_error = std::abs(e.signed_diff);
    r.images.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < m; ++i) {
    IntervalError& ie = r.intervals[i];
    ie.length = p.length(i);
    ie.nl = static_cast<double>(ie.n) * ie.length;
    ie.signed_sum = signed_sums[i].value();
    ie.abs_sum = abs_sums[i].value();
    ie.class_mae = ie.n ? ie.abs_sum / static_cast<double>(ie.n) : 0.0;
    ie.discretization_signed = disc[i].value();
    ie.misclass_signed = mis[i].value();
  }
  summarize(r);
  return r;
}

inline std::vector<LocalCountMap> decode_all(std::span<const ClassMap> classes,
                                             const ProxyTable& proxies, int patch_size = 1) {
  std::vector<LocalCountMap> out;
  out.reserve(classes.size());
  for (const auto& c : classes) out.push_back(decode_count_map(c, proxies, patch_size));
  return out;
}

inline ErrorReport error_decomposition(std::span<const ClassMap> predicted,
                                       std::span<const LocalCountMap> truth, const Partition& p,
                                       const ProxyTable& proxies) {
  if (predicted.size() != truth.size()) {
    throw DataError("error decomposition: " + std::to_string(predicted.size()) + " vs " +
                    std::to_string(truth.size()) + " images");
  }
  std::vector<LocalCountMap> decoded;
  decoded.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    decoded.push_back(decode_count_map(predicted[i], proxies, truth[i].patch_size));
  }
  return error_decomposition(std::span<const LocalCountMap>(decoded), truth, p, proxies);
}

// Error under perfect classification: per image |sum(d_k - delta_class(d_k))|,
// averaged over images with equal weight.
inline ErrorReport discretization_error(std::span<const LocalCountMap> eval, const Partition& p,
                                        const ProxyTable& proxies) {
  if (eval.empty()) throw DataError("discretization error needs at least one image");
  std::vector<LocalCountMap> perfect;
  perfect.reserve(eval.size());
  for (const auto& lc : eval) {
    perfect.push_back(decode_count_map(encode_class_map(lc, p), proxies, lc.patch_size));
  }
  return error_decomposition(std::span<const LocalCountMap>(perfect), eval, p, proxies);
}

}  // namespace uep
