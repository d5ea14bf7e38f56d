#include "bdab/potentials.hpp"

#include <cmath>
#include <utility>

namespace bdab {

namespace {

Eigen::MatrixXd with_ones_row(const Eigen::MatrixXd& features) {
  Eigen::MatrixXd design(features.rows() + 1, features.cols());
  design.topRows(features.rows()) = features;
  design.row(features.rows()).setOnes();
  return design;
}

}  // namespace

FeatureBasis make_feature_basis(Eigen::MatrixXd features,
                                std::optional<Eigen::MatrixXd> duals) {
  if (features.cols() < 1) throw ArgumentError("feature basis: empty sample space");
  if (!features.allFinite()) throw ArgumentError("feature basis: non-finite feature value");

  const Eigen::MatrixXd design = with_ones_row(features);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.transpose());
  if (qr.rank() < design.rows())
    throw ArgumentError(
        "feature basis: features plus the constant function are linearly dependent");

  if (duals) {
    const int n = static_cast<int>(features.cols());
    const int d0 = static_cast<int>(features.rows());
    const int dp = static_cast<int>(duals->rows());
    if (duals->cols() != n) throw ArgumentError("feature basis: dual column count mismatch");
    if (dp < d0 + 1) throw ArgumentError("feature basis: too few dual functions");
    // f_{d'} := 1; check sum_x f_i g^j = delta_i^j for i in {1..d0, d'}.
    for (int j = 0; j < dp; ++j) {
      for (int i = 0; i < d0; ++i) {
        const double s = features.row(i).dot(duals->row(j));
        if (std::abs(s - (i == j ? 1.0 : 0.0)) > 1e-10)
          throw ArgumentError("feature basis: duals violate biorthogonality");
      }
      const double s = duals->row(j).sum();
      if (std::abs(s - (j == dp - 1 ? 1.0 : 0.0)) > 1e-10)
        throw ArgumentError("feature basis: duals violate biorthogonality");
    }
  }
  return FeatureBasis{std::move(features), std::move(duals)};
}

// ---------------------------------------------------------------------------
// LogPartitionSystem

LogPartitionSystem::LogPartitionSystem(FeatureBasis basis)
    : ConvexPotential(basis.feature_count() + 1),
      basis_(std::move(basis)),
      design_(with_ones_row(basis_.features)) {}

Eigen::VectorXd LogPartitionSystem::weights(const NaturalPoint& theta, double* shift) const {
  const Eigen::VectorXd exponents = design_.transpose() * theta;
  const double m = exponents.maxCoeff();
  if (shift) *shift = m;
  return (exponents.array() - m).exp();
}

double LogPartitionSystem::value(const NaturalPoint& theta) const {
  check_point(theta);
  double m = 0.0;
  const Eigen::VectorXd w = weights(theta, &m);
  return std::exp(m) * w.sum();
}

Eigen::VectorXd LogPartitionSystem::gradient(const NaturalPoint& theta) const {
  check_point(theta);
  double m = 0.0;
  const Eigen::VectorXd w = weights(theta, &m);
  return std::exp(m) * (design_ * w);
}

Eigen::MatrixXd LogPartitionSystem::hessian(const NaturalPoint& theta) const {
  check_point(theta);
  double m = 0.0;
  const Eigen::VectorXd w = weights(theta, &m);
  return std::exp(m) * (design_ * w.asDiagonal() * design_.transpose());
}

Eigen::VectorXd LogPartitionSystem::solve_constrained(
    const Eigen::VectorXd& theta_front, const Eigen::VectorXd& constants) const {
  if (!has_constrained_solver(constants))
    throw ArgumentError("log-partition closed form needs a single positive constant");
  if (theta_front.size() != basis_.feature_count())
    throw ArgumentError("constrained solve: wrong leading-coordinate count");
  const Eigen::VectorXd exponents = basis_.features.transpose() * theta_front;
  const double m = exponents.maxCoeff();
  const double lse = m + std::log((exponents.array() - m).exp().sum());
  Eigen::VectorXd tail(1);
  tail[0] = std::log(constants[0]) - lse;
  return tail;
}

// ---------------------------------------------------------------------------
// QuadraticFeatureSystem

QuadraticFeatureSystem::QuadraticFeatureSystem(FeatureBasis basis)
    : ConvexPotential(basis.feature_count() + 1),
      basis_(std::move(basis)),
      design_(with_ones_row(basis_.features)),
      gram_(design_ * design_.transpose()),
      feature_sums_(basis_.features.rowwise().sum()) {
  gram_llt_.compute(gram_);
  if (gram_llt_.info() != Eigen::Success)
    throw ArgumentError("quadratic-feature system: feature Gram matrix is not positive definite");
}

double QuadraticFeatureSystem::value(const NaturalPoint& theta) const {
  check_point(theta);
  return 0.5 * (design_.transpose() * theta).squaredNorm();
}

Eigen::VectorXd QuadraticFeatureSystem::gradient(const NaturalPoint& theta) const {
  check_point(theta);
  return design_ * (design_.transpose() * theta);
}

double QuadraticFeatureSystem::dual_value(const MixturePoint& eta) const {
  return 0.5 * eta.dot(gram_llt_.solve(eta));
}

Eigen::VectorXd QuadraticFeatureSystem::dual_gradient(const MixturePoint& eta) const {
  return gram_llt_.solve(eta);
}

Eigen::VectorXd QuadraticFeatureSystem::solve_constrained(
    const Eigen::VectorXd& theta_front, const Eigen::VectorXd& constants) const {
  if (!has_constrained_solver(constants))
    throw ArgumentError("quadratic-feature closed form needs a single constant");
  if (theta_front.size() != basis_.feature_count())
    throw ArgumentError("constrained solve: wrong leading-coordinate count");
  Eigen::VectorXd tail(1);
  tail[0] = (constants[0] - feature_sums_.dot(theta_front)) / basis_.sample_size();
  return tail;
}

// ---------------------------------------------------------------------------
// QuadraticPotential

QuadraticPotential::QuadraticPotential(int dimension)
    : QuadraticPotential(Eigen::MatrixXd::Identity(dimension, dimension)) {}

QuadraticPotential::QuadraticPotential(Eigen::MatrixXd q)
    : ConvexPotential(static_cast<int>(q.rows())), q_(std::move(q)) {
  if (q_.rows() != q_.cols()) throw ArgumentError("quadratic potential: Q must be square");
  if (!q_.isApprox(q_.transpose(), 1e-12))
    throw ArgumentError("quadratic potential: Q must be symmetric");
  llt_.compute(q_);
  if (llt_.info() != Eigen::Success)
    throw ArgumentError("quadratic potential: Q must be positive definite");
}

LogPartitionSystem make_log_partition_system(FeatureBasis basis) {
  return LogPartitionSystem(
      make_feature_basis(std::move(basis.features), std::move(basis.duals)));
}

QuadraticFeatureSystem make_quadratic_system(FeatureBasis basis) {
  return QuadraticFeatureSystem(
      make_feature_basis(std::move(basis.features), std::move(basis.duals)));
}

}  // namespace bdab
