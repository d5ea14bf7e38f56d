#pragma once

#include <stdexcept>
#include <string>

namespace bdab {

/// A point lies outside the open domain of a potential (or its dual image).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid construction data: dimension mismatches, rank-deficient bases,
/// singular reparameterizations, infeasible constraint levels.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An inner iterative solve ran out of iterations. Carries the last
/// gradient/constraint residual so callers can report how close it got.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what + " (last residual " +
                           std::to_string(last_residual) + ")"),
        residual_(last_residual) {}

  double last_residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace bdab
