#include "deis/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "deis/errors.hpp"

namespace deis::quadrature {

namespace {

GaussRule build_rule() {
  GaussRule rule{};
  constexpr int n = kGaussPoints;
  for (int i = 0; i < n / 2; ++i) {
    // Newton on P_n from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-17) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

struct PanelSum {
  double value;
  double l1;
};

PanelSum composite(const std::function<double(double)>& f, double a, double b, int panels) {
  const auto& rule = gauss_legendre_32();
  const double width = (b - a) / panels;
  double total = 0.0;
  double l1 = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * width;
    const double hi = (p + 1 == panels) ? b : a + (p + 1) * width;
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    double s = 0.0;
    double s_abs = 0.0;
    for (int k = 0; k < kGaussPoints; ++k) {
      const double v = f(mid + half * rule.nodes[k]);
      s += rule.weights[k] * v;
      s_abs += rule.weights[k] * std::fabs(v);
    }
    total += half * s;
    l1 += std::fabs(half) * s_abs;
  }
  return {total, l1};
}

}  // namespace

const GaussRule& gauss_legendre_32() {
  static const GaussRule rule = build_rule();
  return rule;
}

Result integrate(const std::function<double(double)>& f, double a, double b, Options opts) {
  if (a == b) return {0.0, 0};
  PanelSum prev = composite(f, a, b, 1);
  if (!std::isfinite(prev.value)) {
    std::ostringstream msg;
    msg << "quadrature: non-finite integrand on [" << a << ", " << b << "]";
    throw NumericalError(msg.str());
  }
  for (int panels = 2; panels <= opts.max_panels; panels *= 2) {
    const PanelSum cur = composite(f, a, b, panels);
    if (!std::isfinite(cur.value)) {
      std::ostringstream msg;
      msg << "quadrature: non-finite integrand on [" << a << ", " << b << "] with " << panels
          << " panels";
      throw NumericalError(msg.str());
    }
    if (std::fabs(cur.value - prev.value) <= opts.rel_tol * cur.l1) return {cur.value, panels};
    prev = cur;
  }
  std::ostringstream msg;
  msg.precision(17);
  msg << "quadrature: no convergence on [" << a << ", " << b << "] after " << opts.max_panels
      << " panels";
  throw NumericalError(msg.str());
}

}  // namespace deis::quadrature
