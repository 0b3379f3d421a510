#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "deis/diffusion.hpp"
#include "deis/oracle.hpp"
#include "deis/state.hpp"
#include "deis/timegrid.hpp"
#include "deis/weights.hpp"

namespace deis {

/// Result of one sampler pass over a grid. states[i] is the state at grid[i];
/// states[N] is the initial condition and states[0] the sample.
struct SolverRun {
  std::string sampler;
  int order = 0;
  TimeGrid grid;
  std::vector<State> states;
  long nfe = 0;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> warnings;
  int clamped_stages = 0;

  [[nodiscard]] const State& terminal() const { return states.front(); }
};

enum class RkMethod { midpoint, heun2, kutta3, rk4 };

int stage_count(RkMethod method);
std::string to_string(RkMethod method);

/// Explicit Euler on the epsilon-parameterized probability flow ODE.
SolverRun euler_sample(const DiffusionSpec& spec, const ScoreField& field, const TimeGrid& grid,
                       const State& x_T);

/// Exponential integrator holding the raw score s = -eps / L_t constant over each step.
SolverRun ei_score_sample(const DiffusionSpec& spec, const ScoreField& field,
                          const TimeGrid& grid, const State& x_T);

/// Deterministic DDIM update from t to t_prev (vpsde only).
State ddim_step(const DiffusionSpec& spec, const State& x_t, const State& eps_val, Time t,
                Time t_prev);

SolverRun ddim_sample(const DiffusionSpec& spec, const ScoreField& field, const TimeGrid& grid,
                      const State& x_T);

/// t-space Adams-Bashforth exponential integrator of order r (0..3). Uses
/// `table` when given, which must have been built for this grid and order.
SolverRun tab_deis_sample(const DiffusionSpec& spec, const ScoreField& field,
                          const TimeGrid& grid, int r, const State& x_T,
                          const WeightTable* table = nullptr);

/// Adams-Bashforth of order r on dy/drho = eps, y = Psi(0, t) x.
SolverRun rho_ab_sample(const DiffusionSpec& spec, const ScoreField& field, const TimeGrid& grid,
                        int r, const State& x_T);

/// Classical explicit Runge-Kutta on dy/drho = eps. Costs stage_count(method) NFE per step.
SolverRun rho_rk_sample(const DiffusionSpec& spec, const ScoreField& field, const TimeGrid& grid,
                        RkMethod method, const State& x_T);

struct Fraction {
  long num;
  long den;

  [[nodiscard]] double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Multistep blend weights for eps_t, eps_{t+dt}, ... at the given order (0..3).
std::span<const Fraction> ipndm_coefficients(int order);

/// Improved PNDM: fixed-step Adams-Bashforth blend of eps with a DDIM transfer
/// step and low-order warm-up. Non-uniform grids are accepted with a warning.
SolverRun ipndm_sample(const DiffusionSpec& spec, const ScoreField& field, const TimeGrid& grid,
                       int r, const State& x_T);

/// Noise scale eta * sqrt((1 - a_prev) / (1 - a_t) * (1 - a_t / a_prev)).
double sddim_sigma(const DiffusionSpec& spec, Time t, Time t_prev, double eta);

/// Mean of the stochastic DDIM transition.
State sddim_mean(const DiffusionSpec& spec, const State& x_t, const State& eps_val, Time t,
                 Time t_prev, double eta);

/// Stochastic DDIM update; reduces to ddim_step when eta = 0.
State sddim_step(const DiffusionSpec& spec, const State& x_t, const State& eps_val, Time t,
                 Time t_prev, double eta, std::mt19937_64& rng);

SolverRun sddim_sample(const DiffusionSpec& spec, const ScoreField& field, const TimeGrid& grid,
                       double eta, const State& x_T, std::uint64_t seed);

}  // namespace deis
