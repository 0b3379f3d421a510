#include "deis/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "deis/errors.hpp"
#include "deis/timegrid.hpp"

namespace deis {

namespace {

constexpr double kMinVariance = 1e-300;

struct Posterior {
  double score;
  double derivative;
};

// Responsibility-weighted moments of d_k = -(x - mean_k) / var_k.
Posterior posterior(const GaussianMixture& gmm, double mu, double L, double x, Time t,
                    bool want_derivative) {
  const std::size_t K = gmm.size();
  double best = -std::numeric_limits<double>::infinity();
  // Few components; a fixed buffer avoids allocation in the hot path.
  constexpr std::size_t kStack = 16;
  double logits_stack[kStack];
  double d_stack[kStack];
  double inv_var_stack[kStack];
  std::vector<double> heap;
  double* logits = logits_stack;
  double* d = d_stack;
  double* inv_var = inv_var_stack;
  if (K > kStack) {
    heap.resize(3 * K);
    logits = heap.data();
    d = heap.data() + K;
    inv_var = heap.data() + 2 * K;
  }
  for (std::size_t k = 0; k < K; ++k) {
    const double s = gmm.stds[k];
    const double var = mu * mu * s * s + L * L;
    if (!(var >= kMinVariance)) {
      std::ostringstream msg;
      msg << "score: marginal variance underflows at t=" << t;
      throw DomainError(msg.str());
    }
    const double diff = x - mu * gmm.means[k];
    inv_var[k] = 1.0 / var;
    d[k] = -diff * inv_var[k];
    logits[k] = std::log(gmm.weights[k]) - 0.5 * std::log(var) - 0.5 * diff * diff * inv_var[k];
    best = std::max(best, logits[k]);
  }
  double norm = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    logits[k] = std::exp(logits[k] - best);
    norm += logits[k];
  }
  double mean_d = 0.0;
  double mean_d2 = 0.0;
  double mean_inv_var = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double r = logits[k] / norm;
    mean_d += r * d[k];
    if (want_derivative) {
      mean_d2 += r * d[k] * d[k];
      mean_inv_var += r * inv_var[k];
    }
  }
  Posterior out{mean_d, 0.0};
  if (want_derivative) out.derivative = -mean_inv_var + mean_d2 - mean_d * mean_d;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// GaussianMixture

void GaussianMixture::validate() const {
  if (weights.empty()) throw ParameterError("gmm: need at least one component");
  if (weights.size() != means.size() || weights.size() != stds.size()) {
    throw ParameterError("gmm: weights, means and stds must have equal length");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!(weights[k] > 0.0)) throw ParameterError("gmm: weights must be positive");
    if (!(stds[k] > 0.0)) throw ParameterError("gmm: stds must be positive");
    if (!std::isfinite(means[k])) throw ParameterError("gmm: means must be finite");
    total += weights[k];
  }
  if (std::fabs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "gmm: weights sum to " << total << ", expected 1";
    throw ParameterError(msg.str());
  }
}

double GaussianMixture::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < size(); ++k) m += weights[k] * means[k];
  return m;
}

double GaussianMixture::variance() const {
  const double m = mean();
  double second = 0.0;
  for (std::size_t k = 0; k < size(); ++k) {
    second += weights[k] * (stds[k] * stds[k] + means[k] * means[k]);
  }
  return second - m * m;
}

double GaussianMixture::log_density(double x) const {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(size());
  for (std::size_t k = 0; k < size(); ++k) {
    const double z = (x - means[k]) / stds[k];
    terms[k] = std::log(weights[k]) - std::log(stds[k]) - 0.5 * std::log(2.0 * std::numbers::pi) -
               0.5 * z * z;
    best = std::max(best, terms[k]);
  }
  double sum = 0.0;
  for (double v : terms) sum += std::exp(v - best);
  return best + std::log(sum);
}

double GaussianMixture::sample(std::mt19937_64& rng) const {
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t k = size() == 1 ? 0 : pick(rng);
  return means[k] + stds[k] * normal(rng);
}

GaussianMixture marginal_at(const GaussianMixture& gmm, const DiffusionSpec& spec, Time t) {
  const double mu = spec.mu(t);
  const double L = spec.L(t);
  GaussianMixture out = gmm;
  for (std::size_t k = 0; k < gmm.size(); ++k) {
    out.means[k] = mu * gmm.means[k];
    out.stds[k] = std::sqrt(mu * mu * gmm.stds[k] * gmm.stds[k] + L * L);
  }
  return out;
}

double score_scalar(const GaussianMixture& gmm, const DiffusionSpec& spec, double x, Time t) {
  return posterior(gmm, spec.mu(t), spec.L(t), x, t, false).score;
}

State score(const GaussianMixture& gmm, const DiffusionSpec& spec, const State& x, Time t) {
  const double mu = spec.mu(t);
  const double L = spec.L(t);
  State out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = posterior(gmm, mu, L, x[k], t, false).score;
  return out;
}

double score_derivative(const GaussianMixture& gmm, const DiffusionSpec& spec, double x, Time t) {
  return posterior(gmm, spec.mu(t), spec.L(t), x, t, true).derivative;
}

ScoreField epsilon_field(const GaussianMixture& gmm, const DiffusionSpec& spec) {
  gmm.validate();
  return ScoreField([gmm, spec](const State& x, Time t) {
    const double mu = spec.mu(t);
    const double L = spec.L(t);
    State eps(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      eps[k] = -L * posterior(gmm, mu, L, x[k], t, false).score;
    }
    return eps;
  });
}

State pf_velocity(const DiffusionSpec& spec, const ScoreField& field, const State& x, Time t) {
  const double f = spec.f(t);
  const double coef = 0.5 * spec.g2(t) / spec.L(t);
  State v = field(x, t);
  for (std::size_t k = 0; k < x.size(); ++k) v[k] = f * x[k] + coef * v[k];
  return v;
}

// ---------------------------------------------------------------------------
// Reference solver

namespace {

State rk4_step(const DiffusionSpec& spec, const ScoreField& field, const State& x, Time t,
               double h) {
  // h is signed: negative integrates backward in time.
  const State k1 = pf_velocity(spec, field, x, t);
  const State k2 = pf_velocity(spec, field, axpby(1.0, x, 0.5 * h, k1), t + 0.5 * h);
  const State k3 = pf_velocity(spec, field, axpby(1.0, x, 0.5 * h, k2), t + 0.5 * h);
  const State k4 = pf_velocity(spec, field, axpby(1.0, x, h, k3), t + h);
  State out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    out[k] = x[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
  }
  return out;
}

long step_count(double span, double max_dt) {
  return std::max(1L, static_cast<long>(std::ceil(span / max_dt - 1e-9)));
}

void check_step(double dt) {
  if (!(dt > 0.0) || dt > kMaxReferenceStep * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "reference step must satisfy 0 < dt <= " << kMaxReferenceStep << ", got " << dt;
    throw ParameterError(msg.str());
  }
}

}  // namespace

State reference_between(const DiffusionSpec& spec, const ScoreField& field, State x, Time t_from,
                        Time t_to, double max_dt) {
  if (t_from == t_to) return x;
  const long n = step_count(std::fabs(t_to - t_from), max_dt);
  const double h = (t_to - t_from) / static_cast<double>(n);
  for (long k = 0; k < n; ++k) {
    const Time t = (k == 0) ? t_from : t_from + static_cast<double>(k) * h;
    x = rk4_step(spec, field, x, t, h);
    if (!all_finite(x)) {
      std::ostringstream msg;
      msg << "reference solver diverged at step " << k << " (t=" << t << ")";
      throw DivergenceError(msg.str(), k);
    }
  }
  return x;
}

Trajectory reference_solve(const DiffusionSpec& spec, const ScoreField& field, const State& x_T,
                           double dt, Time t0) {
  check_step(dt);
  const Time T = spec.t_end();
  if (!(t0 > 0.0) || !(t0 < T)) throw ParameterError("reference_solve: need 0 < t0 < T");
  const long n = step_count(T - t0, dt);
  const double h = (T - t0) / static_cast<double>(n);
  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(n) + 1);
  traj.states.reserve(static_cast<std::size_t>(n) + 1);
  traj.times.push_back(T);
  traj.states.push_back(x_T);
  for (long k = 1; k <= n; ++k) {
    const Time t = traj.times.back();
    const Time next = (k == n) ? t0 : T - static_cast<double>(k) * h;
    State x = rk4_step(spec, field, traj.states.back(), t, next - t);
    if (!all_finite(x)) {
      std::ostringstream msg;
      msg << "reference solver diverged at step " << k << " (t=" << next << ")";
      throw DivergenceError(msg.str(), k);
    }
    traj.times.push_back(next);
    traj.states.push_back(std::move(x));
  }
  return traj;
}

double reference_self_check(const DiffusionSpec& spec, const ScoreField& field, const State& x_T,
                            double dt, Time t0) {
  const State coarse = reference_solve(spec, field, x_T, dt, t0).terminal();
  const State fine = reference_solve(spec, field, x_T, 0.5 * dt, t0).terminal();
  return max_abs_diff(coarse, fine);
}

// ---------------------------------------------------------------------------
// Euler-Maruyama

State em_simulate(const DiffusionSpec& spec, const ScoreField& field, double lambda,
                  const State& x_T, double dt, Time t0, std::uint64_t rng_seed) {
  if (!(dt > 0.0)) throw ParameterError("em_simulate: dt must be positive");
  if (!(lambda >= 0.0)) throw ParameterError("em_simulate: lambda must be >= 0");
  const Time T = spec.t_end();
  const int n = static_cast<int>(step_count(T - t0, dt));
  const TimeGrid grid = uniform_grid(t0, T, n);

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double drift_scale = 0.5 * (1.0 + lambda * lambda);

  State x = x_T;
  for (int i = n; i >= 1; --i) {
    const Time t = grid[i];
    const double h = t - grid[i - 1];
    const double f = spec.f(t);
    const double g2 = spec.g2(t);
    const double coef = drift_scale * g2 / spec.L(t);
    const State eps = field(x, t);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = x[k] - (f * x[k] + coef * eps[k]) * h;
    if (lambda > 0.0) {
      const double noise = lambda * std::sqrt(g2) * std::sqrt(h);
      for (double& v : x) v += noise * normal(rng);
    }
    if (!all_finite(x)) {
      std::ostringstream msg;
      msg << "em_simulate diverged at step " << n - i + 1 << " (t=" << grid[i - 1] << ")";
      throw DivergenceError(msg.str(), n - i + 1);
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Likelihood

double pf_loglik(const GaussianMixture& gmm, const DiffusionSpec& spec, double x0, double dt) {
  check_step(dt);
  gmm.validate();
  const Time T = spec.t_end();
  const long n = step_count(T, dt);
  const double h = T / static_cast<double>(n);

  // Augmented state (x, int div v); v = f x - g^2/2 * score.
  auto rhs = [&](double x, Time t, double& dx, double& ddiv) {
    const double f = spec.f(t);
    const double g2 = spec.g2(t);
    const Posterior post = posterior(gmm, spec.mu(t), spec.L(t), x, t, true);
    dx = f * x - 0.5 * g2 * post.score;
    ddiv = f - 0.5 * g2 * post.derivative;
  };

  double x = x0;
  double accumulated = 0.0;
  for (long k = 0; k < n; ++k) {
    const Time t = static_cast<double>(k) * h;
    double a1, b1, a2, b2, a3, b3, a4, b4;
    rhs(x, t, a1, b1);
    rhs(x + 0.5 * h * a1, t + 0.5 * h, a2, b2);
    rhs(x + 0.5 * h * a2, t + 0.5 * h, a3, b3);
    rhs(x + h * a3, t + h, a4, b4);
    x += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    accumulated += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    if (!std::isfinite(x) || !std::isfinite(accumulated)) {
      std::ostringstream msg;
      msg << "pf_loglik diverged at step " << k;
      throw DivergenceError(msg.str(), k);
    }
  }
  return marginal_at(gmm, spec, T).log_density(x) + accumulated;
}

double prior_std(const DiffusionSpec& spec) {
  switch (spec.kind()) {
    case DiffusionKind::vp:
      return 1.0;
    case DiffusionKind::ve:
      return spec.ve()->sigma_max;
    case DiffusionKind::custom:
      break;
  }
  return std::hypot(spec.mu(spec.t_end()), spec.L(spec.t_end()));
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ index);
}

}  // namespace deis
