#include "bdab/geometry.hpp"

#include <cmath>
#include <utility>

#include "bdab/newton.hpp"

namespace bdab {

MixturePoint natural_to_mixture(const ConvexPotential& system, const NaturalPoint& theta) {
  if (theta.size() != system.dimension())
    throw ArgumentError("point length does not match system dimension");
  if (!system.in_domain(theta)) throw DomainError("point outside potential domain");
  return system.gradient(theta);
}

NaturalPoint mixture_to_natural(const ConvexPotential& system, const MixturePoint& eta,
                                const NumericSettings& settings,
                                const NaturalPoint* warm_start) {
  if (eta.size() != system.dimension())
    throw ArgumentError("point length does not match system dimension");
  if (system.has_dual()) return system.dual_gradient(eta);

  // theta(eta) minimizes phi(theta) - <eta, theta>.
  NaturalPoint x0 = warm_start ? *warm_start : NaturalPoint::Zero(system.dimension());
  auto result = minimize_newton(
      [&](const Eigen::VectorXd& t) { return system.value(t) - eta.dot(t); },
      [&](const Eigen::VectorXd& t) { return (system.gradient(t) - eta).eval(); },
      [&](const Eigen::VectorXd& t) { return system.hessian(t); },
      [&](const Eigen::VectorXd& t) { return system.in_domain(t); }, std::move(x0),
      settings);
  if (!result.converged)
    throw ConvergenceError("mixture_to_natural: Newton did not converge", result.grad_norm);
  return result.x;
}

double bregman_divergence(const ConvexPotential& system, const NaturalPoint& theta1,
                          const NaturalPoint& theta2) {
  if (theta1.size() != system.dimension() || theta2.size() != system.dimension())
    throw ArgumentError("point length does not match system dimension");
  if (!system.in_domain(theta1) || !system.in_domain(theta2))
    throw DomainError("point outside potential domain");
  return system.gradient(theta1).dot(theta1 - theta2) - system.value(theta1) +
         system.value(theta2);
}

double dual_divergence(const ConvexPotential& system, const MixturePoint& eta1,
                       const MixturePoint& eta2, const NumericSettings& settings) {
  if (system.has_dual()) {
    return system.dual_gradient(eta1).dot(eta1 - eta2) - system.dual_value(eta1) +
           system.dual_value(eta2);
  }
  const NaturalPoint theta1 = mixture_to_natural(system, eta1, settings);
  const NaturalPoint theta2 = mixture_to_natural(system, eta2, settings);
  const double dual1 = eta1.dot(theta1) - system.value(theta1);
  const double dual2 = eta2.dot(theta2) - system.value(theta2);
  return theta1.dot(eta1 - eta2) - dual1 + dual2;
}

NaturalPoint e_project(const ConvexPotential& system, const MixtureFamily& family,
                       const NaturalPoint& theta_bar, const NumericSettings& settings,
                       int* inner_iterations) {
  if (family.dimension() != system.dimension())
    throw ArgumentError("family dimension does not match system dimension");
  if (theta_bar.size() != system.dimension())
    throw ArgumentError("point length does not match system dimension");
  if (!system.in_domain(theta_bar)) throw DomainError("point outside potential domain");

  const int d0 = family.free_count;
  const int k = family.constraint_count();
  const Eigen::VectorXd front = theta_bar.head(d0);

  NaturalPoint projected(system.dimension());
  projected.head(d0) = front;

  if (system.has_constrained_solver(family.constants)) {
    projected.tail(k) = system.solve_constrained(front, family.constants);
    if (inner_iterations) *inner_iterations = 1;
    return projected;
  }

  // Convex reduction: minimize phi(front, tail) - <tail, c> over the tail.
  auto assemble = [&](const Eigen::VectorXd& tail) {
    NaturalPoint t(system.dimension());
    t.head(d0) = front;
    t.tail(k) = tail;
    return t;
  };
  auto result = minimize_newton(
      [&](const Eigen::VectorXd& tail) {
        return system.value(assemble(tail)) - family.constants.dot(tail);
      },
      [&](const Eigen::VectorXd& tail) {
        return (system.gradient(assemble(tail)).tail(k) - family.constants).eval();
      },
      [&](const Eigen::VectorXd& tail) {
        return system.hessian(assemble(tail)).bottomRightCorner(k, k).eval();
      },
      [&](const Eigen::VectorXd& tail) { return system.in_domain(assemble(tail)); },
      theta_bar.tail(k), settings);
  if (!result.converged)
    throw ConvergenceError("e_project: Newton did not converge", result.grad_norm);
  if (inner_iterations) *inner_iterations = std::max(1, result.iterations);
  projected.tail(k) = result.x;
  return projected;
}

namespace {

class ComposedPotential final : public ConvexPotential {
 public:
  ComposedPotential(std::shared_ptr<const ConvexPotential> base, Eigen::MatrixXd U)
      : ConvexPotential(base->dimension()), base_(std::move(base)), u_(std::move(U)) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(u_);
    if (!lu.isInvertible()) throw ArgumentError("canonicalize: U is singular");
    u_inv_ = lu.inverse();
  }

  double value(const NaturalPoint& theta) const override { return base_->value(u_ * theta); }

  Eigen::VectorXd gradient(const NaturalPoint& theta) const override {
    return u_.transpose() * base_->gradient(u_ * theta);
  }

  Eigen::MatrixXd hessian(const NaturalPoint& theta) const override {
    return u_.transpose() * base_->hessian(u_ * theta) * u_;
  }

  bool in_domain(const NaturalPoint& theta) const override {
    return theta.size() == dimension() && theta.allFinite() && base_->in_domain(u_ * theta);
  }

  bool has_dual() const override { return base_->has_dual(); }
  double dual_value(const MixturePoint& eta) const override {
    // (phi o U)*(eta) = phi*(U^{-T} eta)
    return base_->dual_value(u_inv_.transpose() * eta);
  }
  Eigen::VectorXd dual_gradient(const MixturePoint& eta) const override {
    return u_inv_ * base_->dual_gradient(u_inv_.transpose() * eta);
  }

 private:
  std::shared_ptr<const ConvexPotential> base_;
  Eigen::MatrixXd u_;
  Eigen::MatrixXd u_inv_;
};

}  // namespace

CanonicalizedSystem canonicalize(std::shared_ptr<const ConvexPotential> system,
                                 const Eigen::MatrixXd& U, const Eigen::VectorXd& constants) {
  if (!system) throw ArgumentError("canonicalize: null potential");
  const int d = system->dimension();
  if (U.rows() != d || U.cols() != d)
    throw ArgumentError("canonicalize: U must be d x d");
  const int k = static_cast<int>(constants.size());
  if (k < 1 || k > d) throw ArgumentError("canonicalize: bad constraint count");
  auto composed = std::make_shared<ComposedPotential>(std::move(system), U);
  return CanonicalizedSystem{std::move(composed),
                             make_mixture_family(d - k, constants)};
}

}  // namespace bdab
