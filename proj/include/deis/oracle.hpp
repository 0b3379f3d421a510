#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "deis/diffusion.hpp"
#include "deis/state.hpp"

namespace deis {

/// One-dimensional Gaussian mixture. States with several coordinates are
/// treated as independent draws per axis from the same mixture.
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stds;

  static GaussianMixture single(double mean, double std) { return {{1.0}, {mean}, {std}}; }

  /// Throws ParameterError unless weights are positive and sum to 1 (1e-12),
  /// stds are positive, and the three lists have equal non-zero length.
  void validate() const;

  [[nodiscard]] std::size_t size() const { return weights.size(); }
  [[nodiscard]] double mean() const;
  [[nodiscard]] double variance() const;
  [[nodiscard]] double log_density(double x) const;
  [[nodiscard]] double sample(std::mt19937_64& rng) const;
};

/// Push the mixture through the conditional N(mu_t x0, L_t^2).
GaussianMixture marginal_at(const GaussianMixture& gmm, const DiffusionSpec& spec, Time t);

/// Exact score d/dx log p_t(x), applied per coordinate.
State score(const GaussianMixture& gmm, const DiffusionSpec& spec, const State& x, Time t);
double score_scalar(const GaussianMixture& gmm, const DiffusionSpec& spec, double x, Time t);

/// d/dx of the score, i.e. the Hessian of log p_t for a scalar state.
double score_derivative(const GaussianMixture& gmm, const DiffusionSpec& spec, double x, Time t);

/// An epsilon-valued field (x, t) -> -L_t * grad log p_t(x). Every call is
/// counted; copies share the counter.
class ScoreField {
 public:
  using Fn = std::function<State(const State&, Time)>;

  explicit ScoreField(Fn fn)
      : fn_(std::move(fn)), calls_(std::make_shared<std::atomic<long>>(0)) {}

  State operator()(const State& x, Time t) const {
    calls_->fetch_add(1, std::memory_order_relaxed);
    return fn_(x, t);
  }

  [[nodiscard]] long evaluations() const { return calls_->load(std::memory_order_relaxed); }
  void reset_evaluations() const { calls_->store(0, std::memory_order_relaxed); }

 private:
  Fn fn_;
  std::shared_ptr<std::atomic<long>> calls_;
};

ScoreField epsilon_field(const GaussianMixture& gmm, const DiffusionSpec& spec);

/// Right-hand side of the epsilon-parameterized probability flow ODE,
/// f x + g^2 / (2 L) * eps(x, t).
State pf_velocity(const DiffusionSpec& spec, const ScoreField& field, const State& x, Time t);

struct Trajectory {
  std::vector<Time> times;  // decreasing, times.front() == T
  std::vector<State> states;

  [[nodiscard]] const State& terminal() const { return states.back(); }
};

inline constexpr double kMaxReferenceStep = 1e-3;

/// Fixed-step classical RK4 on the probability flow ODE from T down to t0.
/// The step is the largest value <= dt that divides T - t0 evenly.
Trajectory reference_solve(const DiffusionSpec& spec, const ScoreField& field, const State& x_T,
                           double dt, Time t0);

/// RK4 from t_from to t_to (either direction) with steps no longer than max_dt.
State reference_between(const DiffusionSpec& spec, const ScoreField& field, State x, Time t_from,
                        Time t_to, double max_dt);

/// Terminal change when the reference step is halved. Used as a trust check
/// before the reference serves as ground truth.
double reference_self_check(const DiffusionSpec& spec, const ScoreField& field, const State& x_T,
                            double dt, Time t0);

/// Euler-Maruyama on the lambda-family of reverse SDEs, backward from T to t0
/// on the uniform grid with ceil((T - t0) / dt) steps. Deterministic in seed.
State em_simulate(const DiffusionSpec& spec, const ScoreField& field, double lambda,
                  const State& x_T, double dt, Time t0, std::uint64_t rng_seed);

/// log p_0(x0) in nats from the instantaneous change of variables along the
/// probability flow ODE run forward from 0 to T with exact divergence.
double pf_loglik(const GaussianMixture& gmm, const DiffusionSpec& spec, double x0, double dt);

/// Standard deviation of the terminal sampling distribution pi.
double prior_std(const DiffusionSpec& spec);

/// Counter-based per-trajectory seed: splitmix64(splitmix64(seed) XOR index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace deis
