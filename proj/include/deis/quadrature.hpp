#pragma once

#include <array>
#include <functional>

namespace deis::quadrature {

inline constexpr int kGaussPoints = 32;

/// Nodes on [-1, 1] and weights of the 32-point Gauss-Legendre rule.
struct GaussRule {
  std::array<double, kGaussPoints> nodes;
  std::array<double, kGaussPoints> weights;
};

const GaussRule& gauss_legendre_32();

struct Options {
  double rel_tol = 1e-12;
  int max_panels = 1 << 10;
};

struct Result {
  double value = 0.0;
  int panels = 0;
};

/// Composite 32-point Gauss-Legendre on [a, b] with panel doubling until the
/// change between successive refinements is below rel_tol times the L1 mass of
/// the integrand. Orientation follows the limits: integrate(f, b, a) = -integrate(f, a, b).
///
/// Throws NumericalError naming the interval when max_panels is reached first.
Result integrate(const std::function<double(double)>& f, double a, double b, Options opts = {});

}  // namespace deis::quadrature
