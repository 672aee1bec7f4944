#pragma once

// Reference implementations used only by the tests. They are deliberately
// naive and share no code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "uep/grid.hpp"

namespace oracle {

// Sum of a Gaussian kernel stamped at integer pixel (cx, cy), clipped to the
// image, relative to the unclipped kernel on the same (2r+1)^2 window.
inline double clipped_kernel_mass(int width, int height, int cx, int cy, double sigma,
                                  double radius_sigmas) {
  const int r = static_cast<int>(std::ceil(radius_sigmas * sigma));
  double inside = 0.0, full = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      full += w;
      const int x = cx + dx, y = cy + dy;
      if (x >= 0 && x < width && y >= 0 && y < height) inside += w;
    }
  }
  return inside / full;
}

inline uep::Grid<double> block_sums(const uep::Grid<double>& g, int s) {
  const std::size_t rows = (g.rows() + s - 1) / s, cols = (g.cols() + s - 1) / s;
  uep::Grid<double> out(rows, cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::size_t y = r * s; y < std::min(g.rows(), (r + 1) * s); ++y) {
        for (std::size_t x = c * s; x < std::min(g.cols(), (c + 1) * s); ++x) acc += g(y, x);
      }
      out(r, c) = acc;
    }
  }
  return out;
}

inline double skewness(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : xs) {
    m2 += (x - mean) * (x - mean);
    m3 += (x - mean) * (x - mean) * (x - mean);
  }
  m2 /= n;
  m3 /= n;
  return m3 / std::pow(m2, 1.5);
}

// ---------------------------------------------------------------------------
// Interval partition

struct Sweep {
  std::vector<double> points;  // t0 then every closing sample
  double p = 0.0;
  std::size_t n = 0;
};

inline Sweep sweep(const std::vector<double>& sorted_filtered, double t0, double l_bar) {
  Sweep s;
  s.points = {t0};
  s.p = t0;
  for (std::size_t k = 0; k < sorted_filtered.size(); ++k) {
    s.n += 1;
    const double d = sorted_filtered[k];
    if ((d - s.p) * static_cast<double>(s.n) > l_bar) {
      s.points.push_back(d);
      s.p = d;
      s.n = 0;
    }
  }
  return s;
}

// True when the search would raise its lower bound at l_bar.
inline bool too_fine(const std::vector<double>& filtered, double t0, std::size_t m, double t_max,
                     double l_bar) {
  const Sweep s = sweep(filtered, t0, l_bar);
  if (s.points.size() >= m) return true;
  if (s.points.size() + 1 == m) return (t_max - s.p) * static_cast<double>(s.n) > l_bar;
  return false;
}

inline std::optional<std::vector<double>> borders_if_m(const std::vector<double>& filtered,
                                                       double t0, std::size_t m, double t_max,
                                                       double l_bar) {
  const Sweep s = sweep(filtered, t0, l_bar);
  std::vector<double> b{0.0};
  for (double x : s.points) b.push_back(x);
  if (b.back() != t_max) b.push_back(t_max);
  if (b.size() != m + 1) return std::nullopt;
  return b;
}

// Brute-force search for the first l_bar at which the sweep stops being too
// fine: scan a 10^4-point grid, then rescan the bracketing cell with another
// grid until it is narrower than epsilon. Borders come from the sweep at the
// upper end of the bracket when it gives m intervals, else the lower end.
inline std::optional<std::vector<double>> bip_grid(std::vector<double> counts, double t0,
                                                   std::size_t m, double epsilon) {
  std::sort(counts.begin(), counts.end());
  const double t_max = counts.back();
  std::vector<double> filtered;
  for (double x : counts) {
    if (x >= t0) filtered.push_back(x);
  }
  double lo = 0.0;
  double hi = (t_max - t0) * static_cast<double>(filtered.size());
  constexpr int kGrid = 10000;
  while (hi - lo > epsilon) {
    const double step = (hi - lo) / kGrid;
    double new_lo = lo, new_hi = hi;
    for (int j = 1; j <= kGrid; ++j) {
      const double x = j == kGrid ? hi : lo + step * j;
      if (!too_fine(filtered, t0, m, t_max, x)) {
        new_hi = x;
        new_lo = j == 1 ? lo : lo + step * (j - 1);
        break;
      }
    }
    if (new_hi == hi && new_lo == lo) break;
    lo = new_lo;
    hi = new_hi;
  }
  if (auto b = borders_if_m(filtered, t0, m, t_max, hi)) return b;
  if (lo > 0.0) return borders_if_m(filtered, t0, m, t_max, lo);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Proxies

inline double abs_signed_sum(const std::vector<double>& xs, double c) {
  double s = 0.0;
  for (double x : xs) s += x - c;
  return std::abs(s);
}

}  // namespace oracle
