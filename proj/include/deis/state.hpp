#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace deis {

using Time = double;
using Rho = double;

/// A sampler state. Coordinates are independent for the scalar diffusions
/// handled here, so a batch of samples is just a longer state.
using State = std::vector<double>;

inline bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

/// out = a*x + b*y, elementwise.
inline State axpby(double a, const State& x, double b, const State& y) {
  State out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = a * x[k] + b * y[k];
  return out;
}

/// x += a*y
inline void add_scaled(State& x, double a, const State& y) {
  for (std::size_t k = 0; k < x.size(); ++k) x[k] += a * y[k];
}

inline double max_abs_diff(const State& a, const State& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::fmax(m, std::fabs(a[k] - b[k]));
  return m;
}

inline double mean_abs_diff(const State& a, const State& b) {
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::fabs(a[k] - b[k]);
  return s / static_cast<double>(a.size());
}

inline double l2_diff(const State& a, const State& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

}  // namespace deis
