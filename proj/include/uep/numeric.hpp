#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

namespace uep {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double accurate_sum(std::span<const double> xs) noexcept {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

// Population coefficient of variation; 0 for fewer than two values or zero mean.
inline double coefficient_of_variation(std::span<const double> xs) noexcept {
  if (xs.size() < 2) return 0.0;
  const double mean = accurate_sum(xs) / static_cast<double>(xs.size());
  if (mean == 0.0) return 0.0;
  CompensatedSum sq;
  for (double x : xs) sq.add((x - mean) * (x - mean));
  return std::sqrt(sq.value() / static_cast<double>(xs.size())) / std::abs(mean);
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace uep
