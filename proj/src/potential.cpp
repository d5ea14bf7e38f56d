#include "bdab/potential.hpp"

#include <cmath>

namespace bdab {

Eigen::MatrixXd ConvexPotential::hessian(const NaturalPoint& theta) const {
  check_point(theta);
  const int d = dimension();
  Eigen::MatrixXd H(d, d);
  NaturalPoint probe = theta;
  for (int i = 0; i < d; ++i) {
    const double h = std::sqrt(std::numeric_limits<double>::epsilon()) *
                     std::max(1.0, std::abs(theta[i]));
    probe[i] = theta[i] + h;
    const Eigen::VectorXd gp = gradient(probe);
    probe[i] = theta[i] - h;
    const Eigen::VectorXd gm = gradient(probe);
    probe[i] = theta[i];
    H.col(i) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

}  // namespace bdab
