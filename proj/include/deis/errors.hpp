#pragma once

#include <stdexcept>
#include <string>

namespace deis {

/// Malformed or unresolvable experiment configuration. The CLI maps it to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid construction parameters (schedules, grids, mixtures).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain where a quantity is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Interpolation nodes are not pairwise distinct.
class DegenerateNodesError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mismatched inputs between collaborating objects, e.g. a weight table
/// built for a different grid than the one being sampled.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Quadrature or root finding failed to converge, or a state became non-finite.
/// The CLI maps it to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite state encountered while stepping an integrator.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long step) : NumericalError(what), step_(step) {}
  [[nodiscard]] long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace deis
