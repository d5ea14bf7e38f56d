#include "bdab/newton.hpp"

#include <cmath>

namespace bdab {

NewtonResult minimize_newton(
    const std::function<double(const Eigen::VectorXd&)>& value,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& hessian,
    const std::function<bool(const Eigen::VectorXd&)>& in_domain,
    Eigen::VectorXd x0, const NumericSettings& settings) {
  NewtonResult result;
  result.x = std::move(x0);
  double fx = value(result.x);

  for (int it = 0; it < settings.newton_max_iter; ++it) {
    const Eigen::VectorXd g = gradient(result.x);
    result.grad_norm = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
    result.iterations = it;
    if (result.grad_norm <= settings.newton_grad_tol) {
      result.converged = true;
      return result;
    }

    Eigen::VectorXd dir;
    const Eigen::MatrixXd H = hessian(result.x);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() == Eigen::Success) {
      dir = ldlt.solve(-g);
      if (!dir.allFinite() || g.dot(dir) >= 0.0) dir = -g;
    } else {
      dir = -g;
    }

    // Backtracking line search with domain re-entry. Near the optimum the
    // value differences drown in rounding before the gradient tolerance is
    // met, so a full step that contracts the gradient norm is also accepted.
    const double slope = g.dot(dir);
    double step = 1.0;
    bool moved = false;
    while (step > 1e-14) {
      const Eigen::VectorXd trial = result.x + step * dir;
      if (in_domain(trial)) {
        const double ftrial = value(trial);
        if (std::isfinite(ftrial) && ftrial <= fx + 1e-4 * step * slope) {
          result.x = trial;
          fx = ftrial;
          moved = true;
          break;
        }
        if (step == 1.0 && std::isfinite(ftrial)) {
          const Eigen::VectorXd gtrial = gradient(trial);
          if (gtrial.allFinite() && gtrial.cwiseAbs().maxCoeff() < 0.5 * result.grad_norm) {
            result.x = trial;
            fx = ftrial;
            moved = true;
            break;
          }
        }
      }
      step *= 0.5;
    }
    if (!moved) {
      // No admissible decrease left at this scale; report where we stand.
      result.iterations = it + 1;
      result.converged = result.grad_norm <= settings.newton_grad_tol;
      return result;
    }
  }

  const Eigen::VectorXd g = gradient(result.x);
  result.grad_norm = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
  result.iterations = settings.newton_max_iter;
  result.converged = result.grad_norm <= settings.newton_grad_tol;
  return result;
}

}  // namespace bdab
