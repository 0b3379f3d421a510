#include "deis/diffusion.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "deis/errors.hpp"
#include "deis/quadrature.hpp"

namespace deis {

void VpSchedule::validate() const {
  if (!(beta_min > 0.0) || !(beta_max > 0.0) || !(beta_min < beta_max) ||
      !std::isfinite(beta_max)) {
    std::ostringstream msg;
    msg << "vpsde: need 0 < beta_min < beta_max, got beta_min=" << beta_min
        << " beta_max=" << beta_max;
    throw ParameterError(msg.str());
  }
}

double VpSchedule::alpha(Time t) const { return std::exp(log_alpha(t)); }

void VeSchedule::validate() const {
  if (!(sigma_min > 0.0) || !(sigma_min < sigma_max) || !std::isfinite(sigma_max)) {
    std::ostringstream msg;
    msg << "vesde: need 0 < sigma_min < sigma_max, got sigma_min=" << sigma_min
        << " sigma_max=" << sigma_max;
    throw ParameterError(msg.str());
  }
}

DiffusionSpec DiffusionSpec::custom(ScalarFn f, ScalarFn g2, ScalarFn mu, ScalarFn L, Time t_end,
                                    std::string name) {
  if (!f || !g2 || !mu || !L) throw ParameterError("custom diffusion: all coefficients required");
  if (!(t_end > 0.0)) throw ParameterError("custom diffusion: t_end must be positive");
  DiffusionSpec spec;
  spec.f_ = std::move(f);
  spec.g2_ = std::move(g2);
  spec.mu_ = std::move(mu);
  spec.L_ = std::move(L);
  spec.t_end_ = t_end;
  spec.kind_ = DiffusionKind::custom;
  spec.name_ = std::move(name);
  return spec;
}

double DiffusionSpec::alpha(Time t) const {
  if (!vp_) throw ContractError("alpha(t) is only defined for the vpsde preset");
  return vp_->alpha(t);
}

double DiffusionSpec::log_alpha(Time t) const {
  if (!vp_) throw ContractError("log_alpha(t) is only defined for the vpsde preset");
  return vp_->log_alpha(t);
}

double DiffusionSpec::sigma(Time t) const {
  if (!ve_) throw ContractError("sigma(t) is only defined for the vesde preset");
  return ve_->sigma_min * std::pow(ve_->sigma_max / ve_->sigma_min, t / t_end_);
}

DiffusionSpec vpsde(VpSchedule schedule, Time t_end) {
  schedule.validate();
  if (!(t_end > 0.0)) throw ParameterError("vpsde: t_end must be positive");
  DiffusionSpec spec;
  spec.kind_ = DiffusionKind::vp;
  spec.name_ = "vpsde";
  spec.t_end_ = t_end;
  spec.vp_ = schedule;
  // f = 1/2 dlog(alpha)/dt, g^2 = -dlog(alpha)/dt, mu = sqrt(alpha), L = sqrt(1 - alpha)
  spec.f_ = [schedule](Time t) { return -0.5 * schedule.beta(t); };
  spec.g2_ = [schedule](Time t) { return schedule.beta(t); };
  spec.mu_ = [schedule](Time t) { return std::exp(0.5 * schedule.log_alpha(t)); };
  spec.L_ = [schedule](Time t) { return std::sqrt(-std::expm1(schedule.log_alpha(t))); };
  return spec;
}

DiffusionSpec vesde(double sigma_min, double sigma_max, Time t_end) {
  VeSchedule schedule{sigma_min, sigma_max};
  schedule.validate();
  if (!(t_end > 0.0)) throw ParameterError("vesde: t_end must be positive");
  DiffusionSpec spec;
  spec.kind_ = DiffusionKind::ve;
  spec.name_ = "vesde";
  spec.t_end_ = t_end;
  spec.ve_ = schedule;
  const double log_ratio = std::log(sigma_max / sigma_min);
  auto sigma = [=](Time t) { return sigma_min * std::pow(sigma_max / sigma_min, t / t_end); };
  spec.f_ = [](Time) { return 0.0; };
  spec.g2_ = [=](Time t) {
    const double s = sigma(t);
    return 2.0 * s * s * log_ratio / t_end;
  };
  spec.mu_ = [](Time) { return 1.0; };
  spec.L_ = sigma;
  return spec;
}

double transition_by_quadrature(const DiffusionSpec& spec, Time t, Time s) {
  if (t == s) return 1.0;
  const auto integral =
      quadrature::integrate([&spec](double tau) { return spec.f(tau); }, s, t);
  return std::exp(integral.value);
}

double transition(const DiffusionSpec& spec, Time t, Time s) {
  const double slack = 1e-12 * spec.t_end();
  if (t < -slack || s < -slack || t > spec.t_end() + slack || s > spec.t_end() + slack) {
    std::ostringstream msg;
    msg << "transition: times (" << t << ", " << s << ") outside [0, " << spec.t_end() << "]";
    throw DomainError(msg.str());
  }
  if (t == s) return 1.0;
  switch (spec.kind()) {
    case DiffusionKind::vp:
      return std::exp(0.5 * (spec.log_alpha(t) - spec.log_alpha(s)));
    case DiffusionKind::ve:
      return 1.0;
    case DiffusionKind::custom:
      break;
  }
  return transition_by_quadrature(spec, t, s);
}

}  // namespace deis
