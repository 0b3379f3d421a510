#include "deis/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "deis/errors.hpp"

namespace deis {

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

SolverRun run_sampler(const ExperimentConfig& config, const DiffusionSpec& spec,
                      const ScoreField& field, const TimeGrid& grid, const State& x_T,
                      std::uint64_t stream) {
  const std::string& name = config.sampler.name;
  const int r = config.sampler.order;
  if (name == "euler") return euler_sample(spec, field, grid, x_T);
  if (name == "ei_score") return ei_score_sample(spec, field, grid, x_T);
  if (name == "ddim") return ddim_sample(spec, field, grid, x_T);
  if (name == "tab") return tab_deis_sample(spec, field, grid, r, x_T);
  if (name == "rho_ab") return rho_ab_sample(spec, field, grid, r, x_T);
  if (name == "rho_mid") return rho_rk_sample(spec, field, grid, RkMethod::midpoint, x_T);
  if (name == "rho_heun2") return rho_rk_sample(spec, field, grid, RkMethod::heun2, x_T);
  if (name == "rho_kutta3") return rho_rk_sample(spec, field, grid, RkMethod::kutta3, x_T);
  if (name == "rho_rk4") return rho_rk_sample(spec, field, grid, RkMethod::rk4, x_T);
  if (name == "ipndm") return ipndm_sample(spec, field, grid, r, x_T);
  if (name == "sddim") {
    return sddim_sample(spec, field, grid, config.sampler.eta, x_T,
                        derive_seed(config.seed, stream));
  }
  throw ConfigError("unknown sampler '" + name + "'");
}

State draw_prior(const DiffusionSpec& spec, int count, int dim, std::uint64_t seed) {
  const double scale = prior_std(spec);
  State x;
  x.reserve(static_cast<std::size_t>(count) * static_cast<std::size_t>(dim));
  for (int b = 0; b < count; ++b) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    std::normal_distribution<double> normal(0.0, scale);
    for (int k = 0; k < dim; ++k) x.push_back(normal(rng));
  }
  return x;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, double floor) {
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < x.size() && k < y.size(); ++k) {
    if (y[k] >= floor && x[k] > 0.0 && std::isfinite(y[k])) {
      lx.push_back(std::log(x[k]));
      ly.push_back(std::log(y[k]));
    }
  }
  if (lx.size() < 2) throw NumericalError("slope fit needs at least two points above the floor");
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  if (sxx == 0.0) throw NumericalError("slope fit needs distinct x values");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points = static_cast<int>(lx.size());
  return fit;
}

// ---------------------------------------------------------------------------

SampleResult run_sample(const ExperimentConfig& config) {
  config.validate();
  const DiffusionSpec spec = config.make_diffusion();
  const ScoreField field = epsilon_field(config.gmm, spec);
  const TimeGrid grid = config.make_grid(config.schedule.N);
  const State x_T = config.x_T ? *config.x_T : draw_prior(spec, 1, config.dim, config.seed);

  SolverRun run = run_sampler(config, spec, field, grid, x_T);

  MetricReport report;
  report.kind = "sample";
  report.columns = {"step", "t", "rho", "nfe"};
  for (int k = 0; k < config.dim; ++k) report.columns.push_back("x" + std::to_string(k));
  const int N = grid.steps();
  const bool has_rho = supports_rho(spec);
  for (int step = 0; step <= N; ++step) {
    const int i = N - step;
    std::vector<double> row{static_cast<double>(step), grid[i],
                            has_rho ? rho_of_t(spec, grid[i]) : std::nan(""),
                            static_cast<double>(run.nfe * step / N)};
    row.insert(row.end(), run.states[i].begin(), run.states[i].end());
    report.rows.push_back(std::move(row));
  }
  report.sort_rows();
  report.warnings = run.warnings;
  report.stamp(config);
  return {std::move(run), std::move(report)};
}

MetricReport run_convergence(const ExperimentConfig& config) {
  config.validate();
  if (config.N_list.size() < 2) throw ConfigError("config: N_list: need at least two entries");
  const DiffusionSpec spec = config.make_diffusion();
  const ScoreField field = epsilon_field(config.gmm, spec);
  const State x_T = draw_prior(spec, config.batch, config.dim, config.seed);
  const double t0 = config.schedule.t0;

  const double drift = reference_self_check(spec, field, x_T, config.reference_dt, t0);
  if (!(drift <= kReferenceTolerance)) {
    std::ostringstream msg;
    msg << "reference self-check failed: halving dt=" << config.reference_dt
        << " moved the terminal state by " << drift << " (limit " << kReferenceTolerance << ")";
    throw NumericalError(msg.str());
  }
  const State truth = reference_solve(spec, field, x_T, config.reference_dt, t0).terminal();

  std::vector<std::vector<double>> rows(config.N_list.size());
  std::vector<std::vector<std::string>> warnings(config.N_list.size());
  parallel_for(config.N_list.size(), config.threads, [&](std::size_t k) {
    const int N = config.N_list[k];
    const TimeGrid grid = config.make_grid(N);
    const SolverRun run = run_sampler(config, spec, field, grid, x_T, static_cast<std::uint64_t>(k));
    rows[k] = {static_cast<double>(N), static_cast<double>(run.nfe),
               mean_abs_diff(run.terminal(), truth), max_abs_diff(run.terminal(), truth)};
    warnings[k] = run.warnings;
  });

  MetricReport report;
  report.kind = "convergence";
  report.columns = {"N", "nfe", "delta_p", "max_error"};
  report.rows = std::move(rows);
  report.sort_rows();
  for (std::size_t k = 0; k < warnings.size(); ++k) {
    for (const auto& w : warnings[k]) {
      report.warnings.push_back("N=" + std::to_string(config.N_list[k]) + ": " + w);
    }
  }
  std::vector<double> Ns, errs;
  for (const auto& row : report.rows) {
    Ns.push_back(row[0]);
    errs.push_back(row[2]);
  }
  report.summary.emplace_back("reference_self_check", drift);
  report.summary.emplace_back("error_floor", kErrorFloor);
  try {
    const SlopeFit fit = fit_loglog(Ns, errs, kErrorFloor);
    report.summary.emplace_back("slope", fit.slope);
    report.summary.emplace_back("observed_order", -fit.slope);
    report.summary.emplace_back("slope_points", fit.points);
  } catch (const NumericalError& e) {
    report.summary.emplace_back("slope", std::nan(""));
    report.summary.emplace_back("observed_order", std::nan(""));
    report.summary.emplace_back("slope_points", 0);
    report.warnings.push_back(e.what());
  }
  report.stamp(config);
  return report;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kChunk = 1000;

struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;  // central
  double m4 = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  m.n = static_cast<double>(xs.size());
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= m.n;
  for (double x : xs) {
    const double d = (x - m.mean) * (x - m.mean);
    m.m2 += d;
    m.m4 += d * d;
  }
  m.m2 /= m.n;
  m.m4 /= m.n;
  return m;
}

}  // namespace

MetricReport run_marginal(const ExperimentConfig& config) {
  config.validate();
  if (config.lambda_list.empty()) throw ConfigError("config: lambda_list: must not be empty");
  const DiffusionSpec spec = config.make_diffusion();
  const ScoreField field = epsilon_field(config.gmm, spec);
  const double t0 = config.schedule.t0;
  const GaussianMixture at_T = marginal_at(config.gmm, spec, spec.t_end());
  const GaussianMixture target = marginal_at(config.gmm, spec, t0);
  const double target_mean = target.mean();
  const double target_var = target.variance();

  const std::size_t n = static_cast<std::size_t>(config.n_traj);
  const std::size_t per = static_cast<std::size_t>(config.dim);
  const std::size_t chunks = (n + kChunk - 1) / kChunk;

  // Initial states are shared across lambda so the runs are coupled.
  State x_T(n * per);
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::mt19937_64 rng(derive_seed(config.seed, idx));
    for (std::size_t k = 0; k < per; ++k) x_T[idx * per + k] = at_T.sample(rng);
  }

  MetricReport report;
  report.kind = "marginal";
  report.columns = {"lambda",   "n",        "diverged",   "mean",   "target_mean",
                    "se_mean",  "z_mean",   "variance",   "target_variance",
                    "se_variance", "z_variance"};
  bool failed = false;
  for (std::size_t li = 0; li < config.lambda_list.size(); ++li) {
    const double lambda = config.lambda_list[li];
    const std::uint64_t stream = derive_seed(config.seed, 0xA5A5A5A5ULL + li);
    std::vector<State> out(chunks);
    std::vector<char> diverged(chunks, 0);
    parallel_for(chunks, config.threads, [&](std::size_t c) {
      const std::size_t lo = c * kChunk * per;
      const std::size_t hi = std::min(n, (c + 1) * kChunk) * per;
      const State chunk(x_T.begin() + static_cast<std::ptrdiff_t>(lo),
                        x_T.begin() + static_cast<std::ptrdiff_t>(hi));
      try {
        out[c] = em_simulate(spec, field, lambda, chunk, config.dt, t0, derive_seed(stream, c));
      } catch (const DivergenceError&) {
        diverged[c] = 1;
      }
    });
    std::vector<double> xs;
    std::size_t lost = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
      if (diverged[c]) {
        lost += std::min(n, (c + 1) * kChunk) - c * kChunk;
      } else {
        xs.insert(xs.end(), out[c].begin(), out[c].end());
      }
    }
    const Moments m = moments(xs);
    const double se_mean = std::sqrt(m.m2 / m.n);
    const double se_var = std::sqrt(std::fmax(m.m4 - m.m2 * m.m2, 0.0) / m.n);
    report.rows.push_back({lambda, static_cast<double>(n), static_cast<double>(lost), m.mean,
                           target_mean, se_mean, (m.mean - target_mean) / se_mean, m.m2,
                           target_var, se_var, (m.m2 - target_var) / se_var});
    if (static_cast<double>(lost) > kMaxDivergenceRate * static_cast<double>(n)) {
      failed = true;
      std::ostringstream msg;
      msg << "lambda=" << lambda << ": " << lost << " of " << n << " trajectories diverged";
      report.warnings.push_back(msg.str());
    }
  }
  if (failed) report.status = "failed";
  report.sort_rows();
  report.stamp(config);
  return report;
}

// ---------------------------------------------------------------------------

MetricReport run_trace(const ExperimentConfig& config) {
  config.validate();
  const DiffusionSpec spec = config.make_diffusion();
  const ScoreField field = epsilon_field(config.gmm, spec);
  const TimeGrid grid = config.make_grid(config.schedule.N);
  const State x_T = config.x_T ? *config.x_T : draw_prior(spec, 1, config.dim, config.seed);
  const int N = grid.steps();
  const int M = config.trace_points;

  // Ground-truth states at the grid nodes.
  std::vector<State> node(static_cast<std::size_t>(N) + 1);
  node[N] = x_T;
  for (int i = N; i >= 1; --i) {
    node[i - 1] = reference_between(spec, field, node[i], grid[i], grid[i - 1], config.reference_dt);
  }
  std::vector<State> eps_node(node.size());
  for (std::size_t i = 0; i < node.size(); ++i) eps_node[i] = field(node[i], grid[static_cast<int>(i)]);

  auto norm = [](const State& v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    return std::sqrt(s);
  };

  MetricReport report;
  report.kind = "trace";
  report.columns = {"t", "step", "is_node", "delta_s_score", "delta_s_eps",
                    "delta_eps_r0", "delta_eps_r1", "delta_eps_r2", "delta_eps_r3"};
  for (int i = N; i >= 1; --i) {
    const State score_i = score(config.gmm, spec, node[i], grid[i]);
    State x = node[i];
    Time t_prev = grid[i];
    for (int k = 0; k < M; ++k) {
      const Time tau = grid[i] - (grid[i] - grid[i - 1]) * static_cast<double>(k) / M;
      if (k > 0) {
        x = reference_between(spec, field, x, t_prev, tau, config.reference_dt);
        t_prev = tau;
      }
      const State score_tau = score(config.gmm, spec, x, tau);
      const State eps_tau = field(x, tau);
      std::vector<double> row{tau, static_cast<double>(N - i + 1), k == 0 ? 1.0 : 0.0,
                              k == 0 ? 0.0 : l2_diff(score_tau, score_i),
                              k == 0 ? 0.0 : l2_diff(eps_tau, eps_node[i])};
      for (int r = 0; r <= kMaxOrder; ++r) {
        const int len = history_length(i, N, r);
        std::vector<double> nodes(static_cast<std::size_t>(len));
        for (int j = 0; j < len; ++j) nodes[j] = grid[i + j];
        State poly(x.size(), 0.0);
        for (int j = 0; j < len; ++j) {
          add_scaled(poly, lagrange_basis(nodes, static_cast<std::size_t>(j), tau), eps_node[i + j]);
        }
        State diff(x.size());
        for (std::size_t c = 0; c < x.size(); ++c) diff[c] = eps_tau[c] - poly[c];
        row.push_back(norm(diff));
      }
      report.rows.push_back(std::move(row));
    }
  }
  report.sort_rows();
  // Trace means over the whole run and over the last interval [t_0, t_1].
  const std::size_t first_metric = 3;
  for (std::size_t c = first_metric; c < report.columns.size(); ++c) {
    double sum = 0.0, near = 0.0;
    int near_count = 0;
    for (const auto& row : report.rows) {
      sum += row[c];
      if (row[0] <= grid[1]) {
        near += row[c];
        ++near_count;
      }
    }
    report.summary.emplace_back("mean_" + report.columns[c],
                                sum / static_cast<double>(report.rows.size()));
    report.summary.emplace_back("near_t0_mean_" + report.columns[c], near / near_count);
  }
  report.stamp(config);
  return report;
}

// ---------------------------------------------------------------------------

MetricReport run_loglik(const ExperimentConfig& config) {
  config.validate();
  if (config.dim != 1) throw ConfigError("config: dim: loglik needs a one-dimensional oracle");
  if (config.x0_list.empty()) throw ConfigError("config: x0_list: must not be empty");
  const DiffusionSpec spec = config.make_diffusion();
  std::vector<std::vector<double>> rows(config.x0_list.size());
  parallel_for(config.x0_list.size(), config.threads, [&](std::size_t k) {
    const double x0 = config.x0_list[k];
    const double est = pf_loglik(config.gmm, spec, x0, config.dt);
    const double exact = config.gmm.log_density(x0);
    const double gap = est - exact;
    rows[k] = {x0, est, exact, gap, est / std::log(2.0), gap / std::log(2.0)};
  });
  MetricReport report;
  report.kind = "loglik";
  report.columns = {"x0", "loglik_nats", "exact_nats", "gap_nats", "loglik_bits", "gap_bits"};
  report.rows = std::move(rows);
  report.sort_rows();
  report.stamp(config);
  return report;
}

MetricReport run_experiment(const ExperimentConfig& config) {
  switch (config.kind) {
    case ExperimentKind::sample:
      return run_sample(config).report;
    case ExperimentKind::convergence:
      return run_convergence(config);
    case ExperimentKind::marginal:
      return run_marginal(config);
    case ExperimentKind::trace:
      return run_trace(config);
    case ExperimentKind::loglik:
      return run_loglik(config);
  }
  throw ConfigError("unknown experiment kind");
}

WeightTable build_weight_cache(const ExperimentConfig& config) {
  config.validate();
  return tab_weights(config.make_diffusion(), config.make_grid(config.schedule.N),
                     config.sampler.order);
}

}  // namespace deis
