#include "deis/timegrid.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <utility>

#include "deis/errors.hpp"
#include "deis/weights.hpp"

namespace deis {

TimeGrid::TimeGrid(std::vector<Time> times, std::string schedule_name, std::vector<Rho> rho)
    : times_(std::move(times)), name_(std::move(schedule_name)), rho_(std::move(rho)) {
  if (times_.size() < 2) throw ParameterError("time grid: need N >= 1");
  if (!(times_.front() > 0.0)) throw ParameterError("time grid: t_0 must be positive");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "time grid '" << name_ << "': not strictly increasing at index " << i << " ("
          << times_[i - 1] << " >= " << times_[i] << ")";
      throw ParameterError(msg.str());
    }
  }
}

bool TimeGrid::is_uniform(double rel_tol) const {
  const double h = (times_.back() - times_.front()) / steps();
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (std::fabs((times_[i] - times_[i - 1]) - h) > rel_tol * h) return false;
  }
  return true;
}

std::uint64_t TimeGrid::fingerprint() const {
  std::uint64_t hash = 1469598103934665603ULL;
  for (double t : times_) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &t, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      hash ^= (bits >> (8 * b)) & 0xffU;
      hash *= 1099511628211ULL;
    }
  }
  return hash;
}

double power_interpolate(double a, double b, int i, int N, double kappa) {
  const double w = static_cast<double>(i) / N;
  const double lo = std::pow(a, 1.0 / kappa);
  const double hi = std::pow(b, 1.0 / kappa);
  return std::pow((1.0 - w) * lo + w * hi, kappa);
}

namespace {

void check_common(Time t0, Time T, int N) {
  if (!(t0 > 0.0) || !(t0 < T)) {
    std::ostringstream msg;
    msg << "time grid: need 0 < t0 < T, got t0=" << t0 << " T=" << T;
    throw ParameterError(msg.str());
  }
  if (N < 1) throw ParameterError("time grid: need N >= 1");
}

TimeGrid map_rho_to_time(const DiffusionSpec& spec, std::vector<Rho> rho, Time t0, Time T,
                         std::string name) {
  const int N = static_cast<int>(rho.size()) - 1;
  std::vector<Time> times(rho.size());
  times.front() = t0;
  times.back() = T;
  for (int i = 1; i < N; ++i) times[i] = t_of_rho(spec, rho[i]);
  return TimeGrid(std::move(times), std::move(name), std::move(rho));
}

}  // namespace

TimeGrid power_t(Time t0, Time T, int N, double kappa) {
  check_common(t0, T, N);
  if (!(kappa >= 1.0)) throw ParameterError("power_t: kappa must be >= 1");
  std::vector<Time> times(static_cast<std::size_t>(N) + 1);
  times.front() = t0;
  times.back() = T;
  for (int i = 1; i < N; ++i) times[i] = power_interpolate(t0, T, i, N, kappa);
  std::string name = kappa == 1.0 ? "uniform" : (kappa == 2.0 ? "quadratic" : "power_t");
  return TimeGrid(std::move(times), std::move(name));
}

TimeGrid power_rho(const DiffusionSpec& spec, Time t0, Time T, int N, double kappa) {
  check_common(t0, T, N);
  if (!(kappa >= 1.0)) throw ParameterError("power_rho: kappa must be >= 1");
  const Rho lo = rho_of_t(spec, t0);
  const Rho hi = rho_of_t(spec, T);
  std::vector<Rho> rho(static_cast<std::size_t>(N) + 1);
  rho.front() = lo;
  rho.back() = hi;
  for (int i = 1; i < N; ++i) rho[i] = power_interpolate(lo, hi, i, N, kappa);
  return map_rho_to_time(spec, std::move(rho), t0, T, "power_rho");
}

TimeGrid log_rho(const DiffusionSpec& spec, Time t0, Time T, int N) {
  check_common(t0, T, N);
  const double lo = std::log(rho_of_t(spec, t0));
  const double hi = std::log(rho_of_t(spec, T));
  std::vector<Rho> rho(static_cast<std::size_t>(N) + 1);
  for (int i = 0; i <= N; ++i) {
    const double w = static_cast<double>(i) / N;
    rho[i] = std::exp((1.0 - w) * lo + w * hi);
  }
  return map_rho_to_time(spec, std::move(rho), t0, T, "log_rho");
}

TimeGrid make_grid(const DiffusionSpec& spec, const std::string& schedule, Time t0, Time T, int N,
                   double kappa) {
  if (schedule == "uniform") return uniform_grid(t0, T, N);
  if (schedule == "quadratic") return quadratic_grid(t0, T, N);
  if (schedule == "power_t") return power_t(t0, T, N, kappa);
  if (schedule == "power_rho") return power_rho(spec, t0, T, N, kappa);
  if (schedule == "log_rho") return log_rho(spec, t0, T, N);
  throw ConfigError("unknown schedule '" + schedule + "'");
}

}  // namespace deis
