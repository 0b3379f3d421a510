#include "deis/samplers.hpp"

#include <cmath>
#include <deque>
#include <sstream>

#include "deis/errors.hpp"

namespace deis {

namespace {

SolverRun start_run(std::string name, int order, const TimeGrid& grid, const State& x_T) {
  SolverRun run{std::move(name), order, grid, {}, 0, std::nullopt, {}, 0};
  run.states.resize(static_cast<std::size_t>(grid.steps()) + 1);
  run.states.back() = x_T;
  return run;
}

void store(SolverRun& run, int index, State x) {
  if (!all_finite(x)) {
    std::ostringstream msg;
    msg << run.sampler << ": non-finite state at grid index " << index << " (step "
        << run.grid.steps() - index << ")";
    throw DivergenceError(msg.str(), run.grid.steps() - index);
  }
  run.states[static_cast<std::size_t>(index)] = std::move(x);
}

void require_vp(const DiffusionSpec& spec, const char* who) {
  if (spec.kind() != DiffusionKind::vp) {
    throw ContractError(std::string(who) + " requires the vpsde preset");
  }
}

void require_order(int r, const char* who) {
  if (r < 0 || r > kMaxOrder) throw ParameterError(std::string(who) + ": order must be 0..3");
}

State eval(const ScoreField& field, SolverRun& run, const State& x, Time t) {
  ++run.nfe;
  return field(x, t);
}

struct Tableau {
  std::vector<double> c;
  std::vector<std::vector<double>> a;
  std::vector<double> b;
};

const Tableau& tableau(RkMethod method) {
  static const Tableau midpoint{{0.0, 0.5}, {{}, {0.5}}, {0.0, 1.0}};
  static const Tableau heun2{{0.0, 1.0}, {{}, {1.0}}, {0.5, 0.5}};
  static const Tableau kutta3{{0.0, 0.5, 1.0}, {{}, {0.5}, {-1.0, 2.0}},
                              {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0}};
  static const Tableau rk4{{0.0, 0.5, 0.5, 1.0},
                           {{}, {0.5}, {0.0, 0.5}, {0.0, 0.0, 1.0}},
                           {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0}};
  switch (method) {
    case RkMethod::midpoint:
      return midpoint;
    case RkMethod::heun2:
      return heun2;
    case RkMethod::kutta3:
      return kutta3;
    case RkMethod::rk4:
      return rk4;
  }
  return rk4;
}

std::vector<Rho> grid_rho(const DiffusionSpec& spec, const TimeGrid& grid) {
  std::vector<Rho> rho(grid.times().size());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = rho_of_t(spec, grid.times()[i]);
  return rho;
}

}  // namespace

int stage_count(RkMethod method) { return static_cast<int>(tableau(method).b.size()); }

std::string to_string(RkMethod method) {
  switch (method) {
    case RkMethod::midpoint:
      return "rho_mid";
    case RkMethod::heun2:
      return "rho_heun2";
    case RkMethod::kutta3:
      return "rho_kutta3";
    case RkMethod::rk4:
      return "rho_rk4";
  }
  return "rho_rk4";
}

// ---------------------------------------------------------------------------

SolverRun euler_sample(const DiffusionSpec& spec, const ScoreField& field, const TimeGrid& grid,
                       const State& x_T) {
  SolverRun run = start_run("euler", 1, grid, x_T);
  for (int i = grid.steps(); i >= 1; --i) {
    const Time t = grid[i];
    const double h = t - grid[i - 1];
    const double f = spec.f(t);
    const double coef = 0.5 * spec.g2(t) / spec.L(t);
    State x = run.states[i];
    const State eps = eval(field, run, x, t);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = x[k] - (f * x[k] + coef * eps[k]) * h;
    store(run, i - 1, std::move(x));
  }
  return run;
}

SolverRun ei_score_sample(const DiffusionSpec& spec, const ScoreField& field,
                          const TimeGrid& grid, const State& x_T) {
  SolverRun run = start_run("ei_score", 0, grid, x_T);
  for (int i = grid.steps(); i >= 1; --i) {
    const Time t = grid[i];
    const Time t_prev = grid[i - 1];
    const double psi = transition(spec, t_prev, t);
    const double weight = ei_score_weight(spec, t, t_prev);
    const double L = spec.L(t);
    const State eps = eval(field, run, run.states[i], t);
    State x(eps.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double s = -eps[k] / L;
      x[k] = psi * run.states[i][k] + weight * s;
    }
    store(run, i - 1, std::move(x));
  }
  return run;
}

State ddim_step(const DiffusionSpec& spec, const State& x_t, const State& eps_val, Time t,
                Time t_prev) {
  require_vp(spec, "ddim_step");
  const double log_a = spec.log_alpha(t);
  const double log_ap = spec.log_alpha(t_prev);
  const double ratio = std::exp(0.5 * (log_ap - log_a));
  const double coef = std::sqrt(-std::expm1(log_ap)) - ratio * std::sqrt(-std::expm1(log_a));
  return axpby(ratio, x_t, coef, eps_val);
}

SolverRun ddim_sample(const DiffusionSpec& spec, const ScoreField& field, const TimeGrid& grid,
                      const State& x_T) {
  require_vp(spec, "ddim");
  SolverRun run = start_run("ddim", 0, grid, x_T);
  for (int i = grid.steps(); i >= 1; --i) {
    const State eps = eval(field, run, run.states[i], grid[i]);
    store(run, i - 1, ddim_step(spec, run.states[i], eps, grid[i], grid[i - 1]));
  }
  return run;
}

SolverRun tab_deis_sample(const DiffusionSpec& spec, const ScoreField& field,
                          const TimeGrid& grid, int r, const State& x_T,
                          const WeightTable* table) {
  require_order(r, "tab");
  WeightTable built;
  if (table == nullptr) {
    built = tab_weights(spec, grid, r);
    table = &built;
  } else if (table->order() != r || !table->matches(grid)) {
    throw ContractError("tab: weight table was built for a different grid or order");
  }
  SolverRun run = start_run("tab", r, grid, x_T);
  std::deque<State> history;  // front = newest evaluation
  const int N = grid.steps();
  for (int i = N; i >= 1; --i) {
    history.push_front(eval(field, run, run.states[i], grid[i]));
    if (static_cast<int>(history.size()) > r + 1) history.pop_back();
    const auto c = table->c(i);
    State x = run.states[i];
    const double psi = table->psi(i);
    for (double& v : x) v *= psi;
    for (std::size_t j = 0; j < c.size(); ++j) add_scaled(x, c[j], history[j]);
    store(run, i - 1, std::move(x));
  }
  return run;
}

SolverRun rho_ab_sample(const DiffusionSpec& spec, const ScoreField& field, const TimeGrid& grid,
                        int r, const State& x_T) {
  require_order(r, "rho_ab");
  if (!supports_rho(spec)) throw ContractError("rho_ab requires the vpsde or vesde preset");
  SolverRun run = start_run("rho_ab", r, grid, x_T);
  const int N = grid.steps();
  const std::vector<Rho> rho = grid_rho(spec, grid);
  std::deque<State> history;
  State y = x_T;
  const double to_y = transition(spec, 0.0, grid[N]);
  for (double& v : y) v *= to_y;
  for (int i = N; i >= 1; --i) {
    history.push_front(eval(field, run, run.states[i], grid[i]));
    if (static_cast<int>(history.size()) > r + 1) history.pop_back();
    const std::vector<double> w = rho_ab_weights(rho, i, r);
    for (std::size_t j = 0; j < w.size(); ++j) add_scaled(y, w[j], history[j]);
    State x = y;
    const double to_x = transition(spec, grid[i - 1], 0.0);
    for (double& v : x) v *= to_x;
    store(run, i - 1, std::move(x));
  }
  return run;
}

SolverRun rho_rk_sample(const DiffusionSpec& spec, const ScoreField& field, const TimeGrid& grid,
                        RkMethod method, const State& x_T) {
  if (!supports_rho(spec)) throw ContractError("rho_rk requires the vpsde or vesde preset");
  const Tableau& tab = tableau(method);
  const int stages = static_cast<int>(tab.b.size());
  SolverRun run = start_run(to_string(method), stages, grid, x_T);
  const int N = grid.steps();
  const std::vector<Rho> rho = grid_rho(spec, grid);

  State y = x_T;
  const double to_y = transition(spec, 0.0, grid[N]);
  for (double& v : y) v *= to_y;

  std::vector<State> k(static_cast<std::size_t>(stages));
  for (int i = N; i >= 1; --i) {
    const double h = rho[i - 1] - rho[i];
    for (int s = 0; s < stages; ++s) {
      Time t_stage;
      if (tab.c[s] == 0.0) {
        t_stage = grid[i];
      } else if (tab.c[s] == 1.0) {
        t_stage = grid[i - 1];
      } else {
        t_stage = t_of_rho(spec, rho[i] + tab.c[s] * h);
      }
      if (t_stage < grid.t0()) {
        t_stage = grid.t0();
        ++run.clamped_stages;
      }
      State y_stage = y;
      for (int m = 0; m < s; ++m) {
        if (tab.a[s][m] != 0.0) add_scaled(y_stage, h * tab.a[s][m], k[m]);
      }
      const double to_x = transition(spec, t_stage, 0.0);
      for (double& v : y_stage) v *= to_x;
      k[s] = eval(field, run, y_stage, t_stage);
    }
    for (int s = 0; s < stages; ++s) {
      if (tab.b[s] != 0.0) add_scaled(y, h * tab.b[s], k[s]);
    }
    State x = y;
    const double to_x = transition(spec, grid[i - 1], 0.0);
    for (double& v : x) v *= to_x;
    store(run, i - 1, std::move(x));
  }
  if (run.clamped_stages > 0) {
    run.warnings.push_back(std::to_string(run.clamped_stages) + " stage time(s) clamped to t0");
  }
  return run;
}

// ---------------------------------------------------------------------------

std::span<const Fraction> ipndm_coefficients(int order) {
  static const std::array<Fraction, 1> o0{{{1, 1}}};
  static const std::array<Fraction, 2> o1{{{3, 2}, {-1, 2}}};
  static const std::array<Fraction, 3> o2{{{23, 12}, {-16, 12}, {5, 12}}};
  static const std::array<Fraction, 4> o3{{{55, 24}, {-59, 24}, {37, 24}, {-9, 24}}};
  switch (order) {
    case 0:
      return o0;
    case 1:
      return o1;
    case 2:
      return o2;
    case 3:
      return o3;
    default:
      throw ParameterError("ipndm: order must be 0..3");
  }
}

SolverRun ipndm_sample(const DiffusionSpec& spec, const ScoreField& field, const TimeGrid& grid,
                       int r, const State& x_T) {
  require_vp(spec, "ipndm");
  require_order(r, "ipndm");
  SolverRun run = start_run("ipndm", r, grid, x_T);
  if (!grid.is_uniform()) {
    run.warnings.push_back("ipndm: coefficients assume a uniform grid; '" + grid.schedule_name() +
                           "' is not uniform");
  }
  std::deque<State> history;
  for (int i = grid.steps(); i >= 1; --i) {
    history.push_front(eval(field, run, run.states[i], grid[i]));
    if (static_cast<int>(history.size()) > r + 1) history.pop_back();
    const int order = static_cast<int>(history.size()) - 1;
    const auto coef = ipndm_coefficients(order);
    State blended(history.front().size(), 0.0);
    for (std::size_t j = 0; j < coef.size(); ++j) add_scaled(blended, coef[j].value(), history[j]);
    store(run, i - 1, ddim_step(spec, run.states[i], blended, grid[i], grid[i - 1]));
  }
  return run;
}

// ---------------------------------------------------------------------------

double sddim_sigma(const DiffusionSpec& spec, Time t, Time t_prev, double eta) {
  require_vp(spec, "sddim");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("sddim: eta must lie in [0, 1]");
  if (eta == 0.0) return 0.0;
  const double log_a = spec.log_alpha(t);
  const double log_ap = spec.log_alpha(t_prev);
  const double one_minus_ap = -std::expm1(log_ap);
  const double one_minus_a = -std::expm1(log_a);
  if (one_minus_a <= 0.0) return 0.0;
  const double var = one_minus_ap / one_minus_a * -std::expm1(log_a - log_ap);
  return eta * std::sqrt(std::fmax(var, 0.0));
}

State sddim_mean(const DiffusionSpec& spec, const State& x_t, const State& eps_val, Time t,
                 Time t_prev, double eta) {
  const double sigma = sddim_sigma(spec, t, t_prev, eta);
  const double log_a = spec.log_alpha(t);
  const double log_ap = spec.log_alpha(t_prev);
  const double ratio = std::exp(0.5 * (log_ap - log_a));
  const double direction = std::sqrt(std::fmax(-std::expm1(log_ap) - sigma * sigma, 0.0));
  const double coef = direction - ratio * std::sqrt(-std::expm1(log_a));
  return axpby(ratio, x_t, coef, eps_val);
}

State sddim_step(const DiffusionSpec& spec, const State& x_t, const State& eps_val, Time t,
                 Time t_prev, double eta, std::mt19937_64& rng) {
  State x = sddim_mean(spec, x_t, eps_val, t, t_prev, eta);
  const double sigma = sddim_sigma(spec, t, t_prev, eta);
  if (sigma > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : x) v += sigma * normal(rng);
  }
  return x;
}

SolverRun sddim_sample(const DiffusionSpec& spec, const ScoreField& field, const TimeGrid& grid,
                       double eta, const State& x_T, std::uint64_t seed) {
  require_vp(spec, "sddim");
  SolverRun run = start_run("sddim", 0, grid, x_T);
  run.seed = seed;
  std::mt19937_64 rng(seed);
  for (int i = grid.steps(); i >= 1; --i) {
    const State eps = eval(field, run, run.states[i], grid[i]);
    store(run, i - 1, sddim_step(spec, run.states[i], eps, grid[i], grid[i - 1], eta, rng));
  }
  return run;
}

}  // namespace deis
