#pragma once

#include <functional>
#include <optional>
#include <string>

#include "deis/state.hpp"

namespace deis {

/// Linear noise rate beta(s) = beta_min + (beta_max - beta_min) * s, giving
/// alpha(t) = exp(-int_0^t beta(s) ds) in closed form.
struct VpSchedule {
  double beta_min = 0.1;
  double beta_max = 20.0;

  void validate() const;
  [[nodiscard]] double beta(Time t) const { return beta_min + (beta_max - beta_min) * t; }
  [[nodiscard]] double beta_integral(Time t) const {
    return beta_min * t + 0.5 * (beta_max - beta_min) * t * t;
  }
  [[nodiscard]] double log_alpha(Time t) const { return -beta_integral(t); }
  [[nodiscard]] double alpha(Time t) const;
};

/// Geometric noise scale sigma(t) = sigma_min * (sigma_max / sigma_min)^(t / T).
struct VeSchedule {
  double sigma_min = 0.01;
  double sigma_max = 50.0;

  void validate() const;
};

enum class DiffusionKind { vp, ve, custom };

/// Scalar linear forward diffusion dx = f(t) x dt + g(t) dw with Gaussian
/// conditionals N(mu(t) x0, L(t)^2). Immutable once built.
class DiffusionSpec {
 public:
  using ScalarFn = std::function<double(Time)>;

  /// Arbitrary scalar diffusion. Transitions are computed by quadrature of f.
  static DiffusionSpec custom(ScalarFn f, ScalarFn g2, ScalarFn mu, ScalarFn L, Time t_end,
                              std::string name = "custom");

  [[nodiscard]] double f(Time t) const { return f_(t); }
  [[nodiscard]] double g2(Time t) const { return g2_(t); }
  [[nodiscard]] double mu(Time t) const { return mu_(t); }
  [[nodiscard]] double L(Time t) const { return L_(t); }
  [[nodiscard]] Time t_end() const { return t_end_; }
  [[nodiscard]] DiffusionKind kind() const { return kind_; }
  [[nodiscard]] const std::string& name() const { return name_; }

  [[nodiscard]] const std::optional<VpSchedule>& vp() const { return vp_; }
  [[nodiscard]] const std::optional<VeSchedule>& ve() const { return ve_; }

  /// alpha(t) for the VP preset. Throws ContractError for other kinds.
  [[nodiscard]] double alpha(Time t) const;
  [[nodiscard]] double log_alpha(Time t) const;

  /// sigma(t) for the VE preset. Throws ContractError for other kinds.
  [[nodiscard]] double sigma(Time t) const;

  friend DiffusionSpec vpsde(VpSchedule schedule, Time t_end);
  friend DiffusionSpec vesde(double sigma_min, double sigma_max, Time t_end);

 private:
  DiffusionSpec() = default;

  ScalarFn f_;
  ScalarFn g2_;
  ScalarFn mu_;
  ScalarFn L_;
  Time t_end_ = 1.0;
  DiffusionKind kind_ = DiffusionKind::custom;
  std::string name_;
  std::optional<VpSchedule> vp_;
  std::optional<VeSchedule> ve_;
};

DiffusionSpec vpsde(VpSchedule schedule = {}, Time t_end = 1.0);
DiffusionSpec vesde(double sigma_min, double sigma_max, Time t_end = 1.0);

/// Psi(t, s) = exp(int_s^t f). Closed form for the presets, quadrature otherwise.
double transition(const DiffusionSpec& spec, Time t, Time s);

/// Psi(t, s) via Gauss-Legendre quadrature of f regardless of preset.
double transition_by_quadrature(const DiffusionSpec& spec, Time t, Time s);

}  // namespace deis
