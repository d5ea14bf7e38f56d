#pragma once

#include <Eigen/Dense>
#include <optional>

#include "bdab/potential.hpp"

namespace bdab {

/// Feature functions over a finite sample space, stored densely:
/// features(j, x) = f_j(x). Together with the constant function the rows
/// must be linearly independent. Optional dual rows g^j satisfy the
/// biorthogonality sum_x f_i(x) g^j(x) = delta_i^j (with the constant
/// function appended as the last f).
struct FeatureBasis {
  Eigen::MatrixXd features;               ///< d0 x |X|
  std::optional<Eigen::MatrixXd> duals;   ///< d' x |X|

  int sample_size() const { return static_cast<int>(features.cols()); }
  int feature_count() const { return static_cast<int>(features.rows()); }
};

FeatureBasis make_feature_basis(Eigen::MatrixXd features,
                                std::optional<Eigen::MatrixXd> duals = std::nullopt);

/// Log-partition potential: phi(theta) = sum_x exp(sum_j f_j(x) theta^j + theta^{d0+1}).
/// Exponentials are evaluated with a max shift. For a single constraint
/// d_{d0+1} phi = c > 0 the constrained coordinate has the closed form
/// log c - log sum_x exp(sum_j f_j(x) theta^j).
class LogPartitionSystem final : public ConvexPotential {
 public:
  explicit LogPartitionSystem(FeatureBasis basis);

  double value(const NaturalPoint& theta) const override;
  Eigen::VectorXd gradient(const NaturalPoint& theta) const override;
  Eigen::MatrixXd hessian(const NaturalPoint& theta) const override;

  bool has_constrained_solver(const Eigen::VectorXd& constants) const override {
    return constants.size() == 1 && constants[0] > 0.0;
  }
  Eigen::VectorXd solve_constrained(const Eigen::VectorXd& theta_front,
                                    const Eigen::VectorXd& constants) const override;

  const FeatureBasis& basis() const { return basis_; }

 private:
  /// Shifted exponential weights w_x = exp(a_x . theta - m) and the shift m.
  Eigen::VectorXd weights(const NaturalPoint& theta, double* shift) const;

  FeatureBasis basis_;
  Eigen::MatrixXd design_;  ///< (d0+1) x |X|, feature rows plus a row of ones
};

/// Quadratic-feature potential: phi(theta) = 1/2 sum_x (sum_j f_j(x) theta^j + theta^{d0+1})^2.
/// The Hessian is the constant feature Gram matrix, so the system has a
/// closed-form dual, and a single linear constraint has a closed-form
/// constrained coordinate.
class QuadraticFeatureSystem final : public ConvexPotential {
 public:
  explicit QuadraticFeatureSystem(FeatureBasis basis);

  double value(const NaturalPoint& theta) const override;
  Eigen::VectorXd gradient(const NaturalPoint& theta) const override;
  Eigen::MatrixXd hessian(const NaturalPoint&) const override { return gram_; }

  bool has_dual() const override { return true; }
  double dual_value(const MixturePoint& eta) const override;
  Eigen::VectorXd dual_gradient(const MixturePoint& eta) const override;

  bool has_constrained_solver(const Eigen::VectorXd& constants) const override {
    return constants.size() == 1;
  }
  Eigen::VectorXd solve_constrained(const Eigen::VectorXd& theta_front,
                                    const Eigen::VectorXd& constants) const override;

  const FeatureBasis& basis() const { return basis_; }

 private:
  FeatureBasis basis_;
  Eigen::MatrixXd design_;
  Eigen::MatrixXd gram_;
  Eigen::LLT<Eigen::MatrixXd> gram_llt_;
  Eigen::VectorXd feature_sums_;  ///< sum_x f_j(x)
};

/// phi(theta) = 1/2 theta^T Q theta with Q symmetric positive definite
/// (identity by default). Self-dual when Q = I.
class QuadraticPotential final : public ConvexPotential {
 public:
  explicit QuadraticPotential(int dimension);
  explicit QuadraticPotential(Eigen::MatrixXd q);

  double value(const NaturalPoint& theta) const override { return 0.5 * theta.dot(q_ * theta); }
  Eigen::VectorXd gradient(const NaturalPoint& theta) const override { return q_ * theta; }
  Eigen::MatrixXd hessian(const NaturalPoint&) const override { return q_; }

  bool has_dual() const override { return true; }
  double dual_value(const MixturePoint& eta) const override {
    return 0.5 * eta.dot(llt_.solve(eta));
  }
  Eigen::VectorXd dual_gradient(const MixturePoint& eta) const override {
    return llt_.solve(eta);
  }

 private:
  Eigen::MatrixXd q_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

LogPartitionSystem make_log_partition_system(FeatureBasis basis);
QuadraticFeatureSystem make_quadratic_system(FeatureBasis basis);

}  // namespace bdab
