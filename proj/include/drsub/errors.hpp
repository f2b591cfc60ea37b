#pragma once

#include <stdexcept>
#include <string>

namespace drsub {

/// Vector or matrix lengths disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A scalar or structural argument is outside its documented domain.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A linear system has no feasible point. `row` is the index of a constraint
/// whose artificial variable could not be driven to zero (-1 when unknown).
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, int row, double residual)
      : std::runtime_error(what), row_(row), residual_(residual) {}
  int row() const noexcept { return row_; }
  double residual() const noexcept { return residual_; }

 private:
  int row_;
  double residual_;
};

/// Simplex iteration guard exceeded or numerically broken tableau.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative projection did not reach the requested residual.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Online step/feedback calls arrived out of order.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed experiment configuration or input file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace drsub
