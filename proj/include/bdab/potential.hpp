#pragma once

#include <Eigen/Dense>

#include "bdab/errors.hpp"

namespace bdab {

/// Natural coordinate (theta). Length must match the system dimension.
using NaturalPoint = Eigen::VectorXd;
/// Mixture coordinate (eta), the gradient image of a natural point.
using MixturePoint = Eigen::VectorXd;

/// A C^2 strictly convex potential on an open domain in R^d.
///
/// The value/gradient/Hessian oracles define a Bregman divergence system.
/// Two optional hooks unlock closed-form paths:
///   - the Legendre dual (value and gradient), used to invert the
///     coordinate map without an iterative solve;
///   - a constrained-coordinate solver returning the trailing natural
///     coordinates that satisfy the canonical family constraints, used by
///     the e-projection.
///
/// Instances are immutable after construction and safe to share across
/// threads; all oracles are const and allocate only per-call scratch.
class ConvexPotential {
 public:
  explicit ConvexPotential(int dimension) : dim_(dimension) {
    if (dimension <= 0) throw ArgumentError("potential dimension must be positive");
  }
  virtual ~ConvexPotential() = default;

  int dimension() const { return dim_; }

  virtual double value(const NaturalPoint& theta) const = 0;
  virtual Eigen::VectorXd gradient(const NaturalPoint& theta) const = 0;

  /// Default implementation: symmetrized central differences of the
  /// gradient oracle. Override with the analytic form when available.
  virtual Eigen::MatrixXd hessian(const NaturalPoint& theta) const;

  virtual bool in_domain(const NaturalPoint& theta) const {
    return theta.size() == dim_ && theta.allFinite();
  }

  /// Closed-form Legendre dual, when the potential has one.
  virtual bool has_dual() const { return false; }
  virtual double dual_value(const MixturePoint& /*eta*/) const {
    throw DomainError("potential has no closed-form dual value");
  }
  virtual Eigen::VectorXd dual_gradient(const MixturePoint& /*eta*/) const {
    throw DomainError("potential has no closed-form dual gradient");
  }

  /// Closed-form solver for the trailing natural coordinates under the
  /// canonical constraints d_{d0+j} phi = c_j. `constants` is the family
  /// constant vector c; availability may depend on it.
  virtual bool has_constrained_solver(const Eigen::VectorXd& /*constants*/) const {
    return false;
  }
  virtual Eigen::VectorXd solve_constrained(const Eigen::VectorXd& /*theta_front*/,
                                            const Eigen::VectorXd& /*constants*/) const {
    throw DomainError("potential has no closed-form constrained solver");
  }

 protected:
  void check_point(const NaturalPoint& theta) const {
    if (theta.size() != dim_)
      throw ArgumentError("point length does not match system dimension");
    if (!in_domain(theta)) throw DomainError("point outside potential domain");
  }

 private:
  int dim_;
};

}  // namespace bdab
