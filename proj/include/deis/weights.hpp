#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deis/diffusion.hpp"
#include "deis/state.hpp"
#include "deis/timegrid.hpp"

namespace deis {

/// prod_{k != j} (tau - nodes[k]) / (nodes[j] - nodes[k]).
/// Throws DegenerateNodesError on repeated nodes.
double lagrange_basis(std::span<const double> nodes, std::size_t j, double tau);

/// Number of history points usable at step i (1..N) for a scheme of order r:
/// min(r, N - i) + 1.
inline int history_length(int i, int N, int r) { return (r < N - i ? r : N - i) + 1; }

/// Per-step transition scalars and extrapolation weights of the t-space
/// Adams-Bashforth exponential integrator. Row i (1..N) advances t_i -> t_{i-1}:
///
///   x_{i-1} = psi(i) * x_i + sum_j c(i)[j] * eps(x_{i+j}, t_{i+j})
class WeightTable {
 public:
  WeightTable() = default;
  WeightTable(int order, std::vector<Time> grid_times, std::vector<double> psi,
              std::vector<std::vector<double>> c);

  [[nodiscard]] int order() const { return order_; }
  [[nodiscard]] int steps() const { return static_cast<int>(psi_.size()); }
  [[nodiscard]] double psi(int i) const { return psi_.at(static_cast<std::size_t>(i - 1)); }
  [[nodiscard]] std::span<const double> c(int i) const {
    return c_.at(static_cast<std::size_t>(i - 1));
  }
  [[nodiscard]] const std::vector<Time>& grid_times() const { return grid_times_; }
  [[nodiscard]] std::uint64_t grid_id() const;

  [[nodiscard]] bool matches(const TimeGrid& grid) const { return grid.times() == grid_times_; }

  /// {"schema", "order", "grid", "psi", "c"}; doubles round-trip bit-exactly.
  [[nodiscard]] std::string to_json() const;
  static WeightTable from_json(std::string_view text);

  bool operator==(const WeightTable&) const = default;

 private:
  int order_ = 0;
  std::vector<Time> grid_times_;
  std::vector<double> psi_;
  std::vector<std::vector<double>> c_;
};

inline constexpr int kMaxOrder = 3;

/// Builds every Psi(t_{i-1}, t_i) and C_ij by quadrature of
/// 1/2 Psi(t_{i-1}, tau) g^2(tau) / L(tau) * l_j(tau) over [t_i, t_{i-1}],
/// lowering the order where fewer than r + 1 history points exist.
WeightTable tab_weights(const DiffusionSpec& spec, const TimeGrid& grid, int r);

/// Zero-order weight of the score-parameterized exponential integrator,
/// int_{t}^{t_prev} -1/2 Psi(t_prev, tau) g^2(tau) dtau.
double ei_score_weight(const DiffusionSpec& spec, Time t, Time t_prev);

/// Rescaled time: sqrt((1 - alpha) / alpha) for vpsde, sigma(t) for vesde.
/// Throws ContractError for other diffusions.
Rho rho_of_t(const DiffusionSpec& spec, Time t);

/// d rho / dt = 1/2 Psi(0, t) g^2(t) / L(t).
double drho_dt(const DiffusionSpec& spec, Time t);

/// Inverse of rho_of_t by bracketed root finding on [0, T]. Throws
/// DomainError outside [rho(0), rho(T)].
Time t_of_rho(const DiffusionSpec& spec, Rho rho);

/// True when rho_of_t / t_of_rho are available for the spec.
bool supports_rho(const DiffusionSpec& spec);

/// Adams-Bashforth weights in rho: w_j = int_{rho_i}^{rho_{i-1}} l_j(rho) drho
/// over nodes rho_{i+j}, j = 0..min(r, N - i), by exact polynomial integration.
std::vector<double> rho_ab_weights(std::span<const Rho> grid_rho, int i, int r);

}  // namespace deis
