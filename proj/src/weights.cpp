#include "deis/weights.hpp"

#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <cstring>
#include <json.hpp>
#include <sstream>
#include <utility>

#include "deis/errors.hpp"
#include "deis/quadrature.hpp"

namespace deis {

double lagrange_basis(std::span<const double> nodes, std::size_t j, double tau) {
  if (j >= nodes.size()) throw ParameterError("lagrange_basis: index out of range");
  double value = 1.0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (k == j) continue;
    const double denom = nodes[j] - nodes[k];
    if (denom == 0.0) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "lagrange_basis: duplicate node " << nodes[k] << " at positions " << j << " and "
          << k;
      throw DegenerateNodesError(msg.str());
    }
    value *= (tau - nodes[k]) / denom;
  }
  return value;
}

// ---------------------------------------------------------------------------
// WeightTable

WeightTable::WeightTable(int order, std::vector<Time> grid_times, std::vector<double> psi,
                         std::vector<std::vector<double>> c)
    : order_(order), grid_times_(std::move(grid_times)), psi_(std::move(psi)), c_(std::move(c)) {
  const int N = static_cast<int>(grid_times_.size()) - 1;
  if (order_ < 0 || order_ > kMaxOrder) throw ParameterError("weight table: order must be 0..3");
  if (N < 1 || static_cast<int>(psi_.size()) != N || static_cast<int>(c_.size()) != N) {
    throw ParameterError("weight table: psi/c rows must match the grid step count");
  }
  for (int i = 1; i <= N; ++i) {
    if (static_cast<int>(c_[i - 1].size()) != history_length(i, N, order_)) {
      std::ostringstream msg;
      msg << "weight table: row " << i << " has " << c_[i - 1].size() << " entries, expected "
          << history_length(i, N, order_);
      throw ParameterError(msg.str());
    }
  }
}

std::uint64_t WeightTable::grid_id() const {
  return TimeGrid(grid_times_, "weights").fingerprint();
}

std::string WeightTable::to_json() const {
  nlohmann::json doc;
  doc["schema"] = "deis-weights/1";
  doc["order"] = order_;
  doc["grid"] = grid_times_;
  doc["psi"] = psi_;
  doc["c"] = c_;
  return doc.dump();
}

WeightTable WeightTable::from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.value("schema", std::string{}) != "deis-weights/1") {
      throw ConfigError("weight table: unsupported schema");
    }
    return WeightTable(doc.at("order").get<int>(), doc.at("grid").get<std::vector<Time>>(),
                       doc.at("psi").get<std::vector<double>>(),
                       doc.at("c").get<std::vector<std::vector<double>>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("weight table: ") + e.what());
  }
}

WeightTable tab_weights(const DiffusionSpec& spec, const TimeGrid& grid, int r) {
  if (r < 0 || r > kMaxOrder) throw ParameterError("tab_weights: order must be 0..3");
  const int N = grid.steps();
  std::vector<double> psi(static_cast<std::size_t>(N));
  std::vector<std::vector<double>> c(static_cast<std::size_t>(N));
  for (int i = N; i >= 1; --i) {
    const Time t_prev = grid[i - 1];
    const Time t_cur = grid[i];
    psi[i - 1] = transition(spec, t_prev, t_cur);

    const int len = history_length(i, N, r);
    std::vector<double> nodes(static_cast<std::size_t>(len));
    for (int j = 0; j < len; ++j) nodes[j] = grid[i + j];

    auto& row = c[i - 1];
    row.resize(static_cast<std::size_t>(len));
    for (int j = 0; j < len; ++j) {
      auto integrand = [&](double tau) {
        return 0.5 * transition(spec, t_prev, tau) * spec.g2(tau) / spec.L(tau) *
               lagrange_basis(nodes, static_cast<std::size_t>(j), tau);
      };
      try {
        row[j] = quadrature::integrate(integrand, t_cur, t_prev).value;
      } catch (const NumericalError& e) {
        std::ostringstream msg;
        msg << "tab_weights: C[" << i << "][" << j << "] failed: " << e.what();
        throw NumericalError(msg.str());
      }
    }
  }
  return WeightTable(r, grid.times(), std::move(psi), std::move(c));
}

double ei_score_weight(const DiffusionSpec& spec, Time t, Time t_prev) {
  auto integrand = [&](double tau) { return -0.5 * transition(spec, t_prev, tau) * spec.g2(tau); };
  return quadrature::integrate(integrand, t, t_prev).value;
}

// ---------------------------------------------------------------------------
// rho transform

bool supports_rho(const DiffusionSpec& spec) {
  return spec.kind() == DiffusionKind::vp || spec.kind() == DiffusionKind::ve;
}

Rho rho_of_t(const DiffusionSpec& spec, Time t) {
  switch (spec.kind()) {
    case DiffusionKind::vp:
      // (1 - alpha) / alpha = exp(int beta) - 1
      return std::sqrt(std::expm1(-spec.log_alpha(t)));
    case DiffusionKind::ve:
      return spec.sigma(t);
    case DiffusionKind::custom:
      break;
  }
  throw ContractError("rho transform requires the vpsde or vesde preset");
}

double drho_dt(const DiffusionSpec& spec, Time t) {
  if (!supports_rho(spec)) throw ContractError("rho transform requires the vpsde or vesde preset");
  return 0.5 * transition(spec, 0.0, t) * spec.g2(t) / spec.L(t);
}

Time t_of_rho(const DiffusionSpec& spec, Rho rho) {
  const Time T = spec.t_end();
  const Rho lo = rho_of_t(spec, 0.0);
  const Rho hi = rho_of_t(spec, T);
  const double slack = 1e-14 * hi;
  if (!(rho >= lo - slack && rho <= hi + slack)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "t_of_rho: rho=" << rho << " outside [" << lo << ", " << hi << "]";
    throw DomainError(msg.str());
  }
  if (rho <= lo) return 0.0;
  if (rho >= hi) return T;
  auto residual = [&](double t) { return rho_of_t(spec, t) - rho; };
  std::uintmax_t max_iter = 200;
  const auto bracket = boost::math::tools::toms748_solve(
      residual, 0.0, T, lo - rho, hi - rho, boost::math::tools::eps_tolerance<double>(), max_iter);
  const double width = bracket.second - bracket.first;
  if (!(width < 1e-12)) {
    std::ostringstream msg;
    msg << "t_of_rho: bracket did not close for rho=" << rho << " (width " << width << ")";
    throw NumericalError(msg.str());
  }
  return 0.5 * (bracket.first + bracket.second);
}

// ---------------------------------------------------------------------------
// rho-space Adams-Bashforth

namespace {

std::vector<double> poly_mul_linear(const std::vector<double>& p, double root, double scale) {
  // p(u) * (u - root) * scale, coefficients in increasing degree
  std::vector<double> out(p.size() + 1, 0.0);
  for (std::size_t m = 0; m < p.size(); ++m) {
    out[m + 1] += p[m] * scale;
    out[m] -= p[m] * root * scale;
  }
  return out;
}

}  // namespace

std::vector<double> rho_ab_weights(std::span<const Rho> grid_rho, int i, int r) {
  const int N = static_cast<int>(grid_rho.size()) - 1;
  if (i < 1 || i > N) throw ParameterError("rho_ab_weights: step index out of range");
  if (r < 0 || r > kMaxOrder) throw ParameterError("rho_ab_weights: order must be 0..3");
  const int len = history_length(i, N, r);
  const double h = grid_rho[i - 1] - grid_rho[i];
  if (h == 0.0) throw DegenerateNodesError("rho_ab_weights: zero-length rho step");

  // Normalized abscissa u = (rho - rho_i) / h integrates over [0, 1].
  std::vector<double> u(static_cast<std::size_t>(len));
  for (int k = 0; k < len; ++k) u[k] = (grid_rho[i + k] - grid_rho[i]) / h;

  std::vector<double> w(static_cast<std::size_t>(len));
  for (int j = 0; j < len; ++j) {
    std::vector<double> poly{1.0};
    for (int k = 0; k < len; ++k) {
      if (k == j) continue;
      const double denom = u[j] - u[k];
      if (denom == 0.0 || grid_rho[i + j] == grid_rho[i + k]) {
        std::ostringstream msg;
        msg << "rho_ab_weights: duplicate rho nodes at " << i + j << " and " << i + k;
        throw DegenerateNodesError(msg.str());
      }
      poly = poly_mul_linear(poly, u[k], 1.0 / denom);
    }
    double integral = 0.0;
    for (std::size_t m = 0; m < poly.size(); ++m) integral += poly[m] / static_cast<double>(m + 1);
    w[j] = h * integral;
  }
  return w;
}

}  // namespace deis
