#pragma once

#include <Eigen/Dense>
#include <functional>

#include "bdab/settings.hpp"

namespace bdab {

struct NewtonResult {
  Eigen::VectorXd x;
  double grad_norm = 0.0;  ///< infinity norm of the gradient at x
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton minimization of a smooth convex function.
///
/// Steps solve H d = -g; when the factorization fails or d is not a descent
/// direction the step falls back to -g. Steps are halved until the trial
/// point is inside the domain and achieves an Armijo decrease. Stops when
/// the gradient infinity norm drops below settings.newton_grad_tol.
NewtonResult minimize_newton(
    const std::function<double(const Eigen::VectorXd&)>& value,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& hessian,
    const std::function<bool(const Eigen::VectorXd&)>& in_domain,
    Eigen::VectorXd x0, const NumericSettings& settings = {});

}  // namespace bdab
