#pragma once

// Point annotations -> density maps -> local-count maps -> pooled count collection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "uep/error.hpp"
#include "uep/grid.hpp"

namespace uep {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

// Head-point annotation of one image (the dot map).
struct PointAnnotation {
  std::string image_id;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<Point> points;

  // Throws DataError naming the first offending point.
  void validate() const {
    if (width == 0 || height == 0) {
      throw DataError("annotation '" + image_id + "': image dimensions must be positive");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Point& p = points[i];
      if (!(p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height)) {
        throw DataError("annotation '" + image_id + "': point " + std::to_string(i) + " (" +
                        std::to_string(p.x) + ", " + std::to_string(p.y) + ") lies outside the " +
                        std::to_string(width) + "x" + std::to_string(height) + " image");
      }
    }
  }

  friend bool operator==(const PointAnnotation&, const PointAnnotation&) = default;
};

struct FixedSigma {
  double sigma = 15.0;
};

// sigma_i = beta * mean distance to the k nearest other points.
struct GeometryAdaptive {
  int k = 3;
  double beta = 0.3;
  double fallback_sigma = 15.0;  // used when an image holds a single point
};

struct KernelSpec {
  std::variant<FixedSigma, GeometryAdaptive> mode = FixedSigma{};
  double truncation_radius_sigmas = 4.0;
  bool renormalize_at_borders = true;

  void validate() const {
    if (!(truncation_radius_sigmas > 0.0)) {
      throw ParameterError("kernel truncation radius must be positive");
    }
    if (const auto* fixed = std::get_if<FixedSigma>(&mode)) {
      if (!(fixed->sigma > 0.0)) throw ParameterError("kernel sigma must be positive");
    } else {
      const auto& adaptive = std::get<GeometryAdaptive>(mode);
      if (adaptive.k < 1) throw ParameterError("adaptive kernel k must be >= 1");
      if (!(adaptive.beta > 0.0)) throw ParameterError("adaptive kernel beta must be positive");
      if (!(adaptive.fallback_sigma > 0.0)) {
        throw ParameterError("adaptive kernel fallback sigma must be positive");
      }
    }
  }
};

// Persons per pixel.
struct DensityMap {
  std::string image_id;
  Grid<double> values;
  friend bool operator==(const DensityMap&, const DensityMap&) = default;
};

// Persons per s x s patch.
struct LocalCountMap {
  std::string image_id;
  int patch_size = 1;
  Grid<double> values;
  friend bool operator==(const LocalCountMap&, const LocalCountMap&) = default;
};

// Ascending multiset of local counts pooled over a training set.
class CountCollection {
 public:
  CountCollection() = default;

  // Sorts the values. Throws DataError on negative or non-finite input.
  explicit CountCollection(std::vector<double> counts) : counts_(std::move(counts)) {
    for (double c : counts_) {
      if (!std::isfinite(c) || c < 0.0) {
        throw DataError("local counts must be finite and non-negative");
      }
    }
    std::sort(counts_.begin(), counts_.end());
  }

  std::span<const double> counts() const noexcept { return counts_; }
  std::size_t size() const noexcept { return counts_.size(); }
  bool empty() const noexcept { return counts_.empty(); }
  double t_max() const noexcept { return counts_.empty() ? 0.0 : counts_.back(); }

  // The suffix of counts >= threshold.
  std::span<const double> at_least(double threshold) const noexcept {
    const auto it = std::lower_bound(counts_.begin(), counts_.end(), threshold);
    return {it, counts_.end()};
  }

 private:
  std::vector<double> counts_;
};

// Per-point kernel widths from k-nearest-neighbour distances.
inline std::vector<double> adaptive_sigmas(const PointAnnotation& ann, int k, double beta,
                                           double fallback_sigma = 15.0) {
  const std::size_t n = ann.points.size();
  if (n == 0) throw ParameterError("adaptive sigmas need at least one point");
  if (k < 1) throw ParameterError("adaptive kernel k must be >= 1");
  std::vector<double> sigmas(n, fallback_sigma);
  if (n == 1) return sigmas;

  const std::size_t neighbours = std::min<std::size_t>(static_cast<std::size_t>(k), n - 1);
  std::vector<double> dist;
  dist.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dist.push_back(
          std::hypot(ann.points[i].x - ann.points[j].x, ann.points[i].y - ann.points[j].y));
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(neighbours),
                      dist.end());
    double total = 0.0;
    for (std::size_t j = 0; j < neighbours; ++j) total += dist[j];
    sigmas[i] = beta * total / static_cast<double>(neighbours);
  }
  return sigmas;
}

namespace detail {

// Adds one truncated Gaussian of unit mass centred on the rounded pixel of p.
inline void stamp_gaussian(Grid<double>& grid, Point p, double sigma, double radius_sigmas,
                           bool renormalize) {
  const auto rows = static_cast<long>(grid.rows());
  const auto cols = static_cast<long>(grid.cols());
  const long cx = std::min(static_cast<long>(std::lround(p.x)), cols - 1);
  const long cy = std::min(static_cast<long>(std::lround(p.y)), rows - 1);
  const auto radius = static_cast<long>(std::ceil(radius_sigmas * sigma));

  // Separable kernel: w(dx, dy) = g[dx] * g[dy].
  std::vector<double> g(static_cast<std::size_t>(2 * radius + 1));
  for (long d = -radius; d <= radius; ++d) {
    g[static_cast<std::size_t>(d + radius)] =
        d == 0 ? 1.0 : std::exp(-static_cast<double>(d * d) / (2.0 * sigma * sigma));
  }
  const long x0 = std::max(cx - radius, 0L);
  const long x1 = std::min(cx + radius, cols - 1);
  const long y0 = std::max(cy - radius, 0L);
  const long y1 = std::min(cy + radius, rows - 1);

  double full = 0.0;
  for (double v : g) full += v;
  double clipped_x = 0.0;
  for (long x = x0; x <= x1; ++x) clipped_x += g[static_cast<std::size_t>(x - cx + radius)];
  double clipped_y = 0.0;
  for (long y = y0; y <= y1; ++y) clipped_y += g[static_cast<std::size_t>(y - cy + radius)];

  const double norm = renormalize ? clipped_x * clipped_y : full * full;
  for (long y = y0; y <= y1; ++y) {
    const double wy = g[static_cast<std::size_t>(y - cy + radius)] / norm;
    for (long x = x0; x <= x1; ++x) {
      grid(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) +=
          wy * g[static_cast<std::size_t>(x - cx + radius)];
    }
  }
}

}  // namespace detail

inline DensityMap generate_density_map(const PointAnnotation& ann, const KernelSpec& spec) {
  ann.validate();
  spec.validate();
  DensityMap out{ann.image_id, Grid<double>(ann.height, ann.width, 0.0)};
  if (ann.points.empty()) return out;

  std::vector<double> sigmas;
  if (const auto* fixed = std::get_if<FixedSigma>(&spec.mode)) {
    sigmas.assign(ann.points.size(), fixed->sigma);
  } else {
    const auto& adaptive = std::get<GeometryAdaptive>(spec.mode);
    sigmas = adaptive_sigmas(ann, adaptive.k, adaptive.beta, adaptive.fallback_sigma);
  }
  for (std::size_t i = 0; i < ann.points.size(); ++i) {
    // Coincident points give sigma 0; the stamp degenerates to a single pixel.
    detail::stamp_gaussian(out.values, ann.points[i], sigmas[i], spec.truncation_radius_sigmas,
                           spec.renormalize_at_borders);
  }
  return out;
}

// Non-overlapping s x s block sums; ragged last row/column blocks sum what remains.
inline LocalCountMap extract_local_counts(const DensityMap& density, int patch_size) {
  if (patch_size < 1) throw ParameterError("patch size must be >= 1");
  const auto s = static_cast<std::size_t>(patch_size);
  const std::size_t rows = density.values.rows();
  const std::size_t cols = density.values.cols();
  LocalCountMap out{density.image_id, patch_size,
                    Grid<double>((rows + s - 1) / s, (cols + s - 1) / s, 0.0)};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out.values(r / s, c / s) += density.values(r, c);
    }
  }
  return out;
}

inline CountCollection collect_counts(std::span<const LocalCountMap> maps) {
  if (maps.empty()) throw DataError("cannot collect counts from zero local-count maps");
  std::size_t total = 0;
  for (const auto& m : maps) total += m.values.size();
  std::vector<double> all;
  all.reserve(total);
  for (const auto& m : maps) {
    const auto flat = m.values.flat();
    all.insert(all.end(), flat.begin(), flat.end());
  }
  return CountCollection(std::move(all));
}

}  // namespace uep
