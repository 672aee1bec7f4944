#pragma once

// Synthetic data sources for desk-scale experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "uep/density.hpp"
#include "uep/error.hpp"
#include "uep/rng.hpp"

namespace uep {

struct UniformLayout {};

// Points scattered around c uniformly placed centres with isotropic normal spread (pixels).
struct GaussianClusters {
  int clusters = 4;
  double spread = 20.0;
};

using SceneLayout = std::variant<UniformLayout, GaussianClusters>;

inline PointAnnotation synth_scene(std::string image_id, std::size_t n_points,
                                   const SceneLayout& layout, std::uint32_t width,
                                   std::uint32_t height, std::uint64_t seed) {
  if (width == 0 || height == 0) throw ParameterError("scene dimensions must be positive");
  PointAnnotation ann{std::move(image_id), width, height, {}};
  ann.points.reserve(n_points);
  rng::Stream rs(seed, 0x5ce9e);
  const double w = width;
  const double h = height;

  if (std::holds_alternative<UniformLayout>(layout)) {
    for (std::size_t i = 0; i < n_points; ++i) {
      ann.points.push_back({rs.uniform() * w, rs.uniform() * h});
    }
    return ann;
  }

  const auto& cl = std::get<GaussianClusters>(layout);
  if (cl.clusters < 1) throw ParameterError("cluster layout needs at least one cluster");
  if (!(cl.spread > 0.0)) throw ParameterError("cluster spread must be positive");
  std::vector<Point> centres;
  for (int c = 0; c < cl.clusters; ++c) centres.push_back({rs.uniform() * w, rs.uniform() * h});

  for (std::size_t i = 0; i < n_points; ++i) {
    const Point& c = centres[rs.below(centres.size())];
    Point p{};
    bool inside = false;
    for (int attempt = 0; attempt < 64 && !inside; ++attempt) {
      p = {c.x + cl.spread * rs.normal(), c.y + cl.spread * rs.normal()};
      inside = p.x >= 0.0 && p.x < w && p.y >= 0.0 && p.y < h;
    }
    if (!inside) {
      p.x = std::clamp(p.x, 0.0, std::nextafter(w, 0.0));
      p.y = std::clamp(p.y, 0.0, std::nextafter(h, 0.0));
    }
    ann.points.push_back(p);
  }
  return ann;
}

// Local-count maps whose cells are background (0) with the given probability and
// otherwise log-normal(mu, sigma). Images are named "<prefix><index>".
inline std::vector<LocalCountMap> synth_lognormal_maps(std::size_t images, std::size_t rows,
                                                       std::size_t cols, double mu, double sigma,
                                                       double background_fraction,
                                                       std::uint64_t seed,
                                                       const std::string& prefix = "img") {
  if (!(sigma > 0.0)) throw ParameterError("log-normal sigma must be positive");
  if (!(background_fraction >= 0.0 && background_fraction < 1.0)) {
    throw ParameterError("background fraction must lie in [0, 1)");
  }
  std::vector<LocalCountMap> maps;
  maps.reserve(images);
  for (std::size_t i = 0; i < images; ++i) {
    rng::Stream rs(seed, 0x109a0000ULL + i);
    LocalCountMap m{prefix + std::to_string(i), 8, Grid<double>(rows, cols, 0.0)};
    for (double& v : m.values.flat()) {
      const bool background = rs.uniform() < background_fraction;
      const double z = rs.normal();
      v = background ? 0.0 : std::exp(mu + sigma * z);
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

// Plain log-normal sample, pooled.
inline CountCollection synth_lognormal_collection(std::size_t k, double mu, double sigma,
                                                  std::uint64_t seed) {
  rng::Stream rs(seed, 0x109a);
  std::vector<double> v(k);
  for (double& x : v) x = std::exp(mu + sigma * rs.normal());
  return CountCollection(std::move(v));
}

}  // namespace uep
