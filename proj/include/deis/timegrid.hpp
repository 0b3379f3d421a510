#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deis/diffusion.hpp"
#include "deis/state.hpp"

namespace deis {

/// Discretization t_0 < t_1 < ... < t_N = T with t_0 > 0. Samplers walk it
/// from index N down to 0.
class TimeGrid {
 public:
  /// Throws ParameterError unless times are strictly increasing, t_0 > 0 and N >= 1.
  TimeGrid(std::vector<Time> times, std::string schedule_name, std::vector<Rho> rho = {});

  [[nodiscard]] int steps() const { return static_cast<int>(times_.size()) - 1; }
  [[nodiscard]] Time operator[](int i) const { return times_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const std::vector<Time>& times() const { return times_; }
  [[nodiscard]] Time t0() const { return times_.front(); }
  [[nodiscard]] Time t_end() const { return times_.back(); }
  [[nodiscard]] const std::string& schedule_name() const { return name_; }

  /// Generating rho values for rho-space schedules, empty otherwise.
  [[nodiscard]] const std::vector<Rho>& rho() const { return rho_; }

  /// True when all steps agree to rel_tol.
  [[nodiscard]] bool is_uniform(double rel_tol = 1e-9) const;

  /// FNV-1a hash over the bit patterns of the times.
  [[nodiscard]] std::uint64_t fingerprint() const;

 private:
  std::vector<Time> times_;
  std::string name_;
  std::vector<Rho> rho_;
};

/// Value of the power-kappa interpolation between a and b at fraction i/N.
double power_interpolate(double a, double b, int i, int N, double kappa);

/// t_i = ((N-i)/N t0^(1/kappa) + i/N T^(1/kappa))^kappa.
TimeGrid power_t(Time t0, Time T, int N, double kappa);
inline TimeGrid uniform_grid(Time t0, Time T, int N) { return power_t(t0, T, N, 1.0); }
/// linspace(sqrt(t0), sqrt(T), N + 1)^2.
inline TimeGrid quadratic_grid(Time t0, Time T, int N) { return power_t(t0, T, N, 2.0); }

/// Power-kappa interpolation in rho between rho(t0) and rho(T), mapped back to time.
TimeGrid power_rho(const DiffusionSpec& spec, Time t0, Time T, int N, double kappa);

/// Uniform steps in log rho between rho(t0) and rho(T), mapped back to time.
TimeGrid log_rho(const DiffusionSpec& spec, Time t0, Time T, int N);

/// Schedule by name: uniform, quadratic, power_t, power_rho, log_rho.
TimeGrid make_grid(const DiffusionSpec& spec, const std::string& schedule, Time t0, Time T, int N,
                   double kappa);

}  // namespace deis
