#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "deis/config.hpp"
#include "deis/report.hpp"
#include "deis/samplers.hpp"
#include "deis/weights.hpp"

namespace deis {

/// Runs the configured sampler. stream selects the noise stream for sddim.
SolverRun run_sampler(const ExperimentConfig& config, const DiffusionSpec& spec,
                      const ScoreField& field, const TimeGrid& grid, const State& x_T,
                      std::uint64_t stream = 0);

/// `count` blocks of `dim` N(0, prior_std^2) draws, block b seeded by derive_seed(seed, b).
State draw_prior(const DiffusionSpec& spec, int count, int dim, std::uint64_t seed);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  int points = 0;
};

/// Least-squares line through (log x, log y), skipping points with y < floor.
/// Throws NumericalError when fewer than two points remain.
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, double floor);

inline constexpr double kErrorFloor = 1e-9;
inline constexpr double kReferenceTolerance = 1e-6;
inline constexpr double kMaxDivergenceRate = 1e-3;

struct SampleResult {
  SolverRun run;
  MetricReport report;
};

/// Trajectory with columns (step, t, rho, nfe, x0, x1, ...); step 0 is x_T.
SampleResult run_sample(const ExperimentConfig& config);

/// Terminal error against the RK4 reference for every N in N_list, with the
/// fitted log-log slope. Aborts with NumericalError if the reference fails
/// its dt-halving check.
MetricReport run_convergence(const ExperimentConfig& config);

/// Euler-Maruyama terminal moments per lambda against the data moments at t0.
MetricReport run_marginal(const ExperimentConfig& config);

/// Errors along one reference trajectory, sampled trace_points times per step:
/// delta_s_score = |s(x_tau, tau) - s(x_i, t_i)|, delta_s_eps = |eps(x_tau, tau) - eps(x_i, t_i)|
/// and delta_eps_r* = |eps(x_tau, tau) - P_r(tau)| for the order-r history polynomial.
MetricReport run_trace(const ExperimentConfig& config);

/// Probability flow log-likelihood per x0 with the analytic density.
MetricReport run_loglik(const ExperimentConfig& config);

MetricReport run_experiment(const ExperimentConfig& config);

/// Weight table for the configured grid and sampler order.
WeightTable build_weight_cache(const ExperimentConfig& config);

/// Calls fn(i) for i in [0, n) on up to `threads` workers (0: hardware
/// concurrency). The first exception is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace deis
