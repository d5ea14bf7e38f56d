#pragma once

#include <Eigen/Dense>
#include <functional>

#include "bdab/solver.hpp"

namespace bdab {

struct DiscreteDistribution {
  Eigen::VectorXd probs;
  int size() const { return static_cast<int>(probs.size()); }
};

DiscreteDistribution make_distribution(Eigen::VectorXd probs);

/// Row-stochastic conditional, rows(x, y) = W(y|x). The displayed optimal
/// matrix in the source experiment is indexed (y, x); ingest it transposed.
struct ConditionalDistribution {
  Eigen::MatrixXd rows;
};

ConditionalDistribution make_conditional(Eigen::MatrixXd rows);

/// Rate-distortion instance: source p_x over d1 symbols, d1 x d2 distortion
/// matrix, and the required expected distortion level c.
struct RdProblem {
  DiscreteDistribution p_x;
  Eigen::MatrixXd distortion;
  double level = 0.0;

  int d1() const { return static_cast<int>(distortion.rows()); }
  int d2() const { return static_cast<int>(distortion.cols()); }
};

/// Validates shapes, positivity of p_x, the corner condition
/// R(d1,d2) != R(d1,d2-1), and strict feasibility of the level c.
RdProblem make_rd_problem(DiscreteDistribution p_x, Eigen::MatrixXd distortion, double level);

/// Indicator features f_j, their biorthogonal duals g^j and the affine
/// offset of the joint-table coordinate chart. Tables are stored flattened
/// x-major: column index n = x * d2 + y.
struct RdBasis {
  int d0 = 0;
  Eigen::MatrixXd f;       ///< d0 x (d1*d2)
  Eigen::MatrixXd g;       ///< d0 x (d1*d2)
  Eigen::MatrixXd offset;  ///< d1 x d2 affine part of the chart
};

RdBasis build_rd_basis(const RdProblem& problem);

/// A (possibly signed) joint table. Row sums always equal p_x and the
/// distortion identity holds by construction of the chart.
struct JointTable {
  Eigen::MatrixXd values;
};

JointTable joint_from_eta(const RdProblem& problem, const RdBasis& basis,
                          const Eigen::VectorXd& eta);
Eigen::VectorXd eta_from_joint(const RdBasis& basis, const JointTable& joint);

/// Clipped objective: sum P log(P)_+ - sum p_x log p_x - sum marg log(marg)_+
/// with (t)_+ = max(t, epsilon). Equals I(X;Y) when the table and its
/// y-marginal are entrywise >= epsilon.
double rd_objective(const RdProblem& problem, const RdBasis& basis, double epsilon,
                    const Eigen::VectorXd& eta);

/// The d0 free components of the clipped gradient-like map plus the affine
/// remainder component, so that <(eta,1), rd_omega> = rd_objective.
Eigen::VectorXd rd_omega(const RdProblem& problem, const RdBasis& basis, double epsilon,
                         const Eigen::VectorXd& eta);

/// I(X;Y) in nats; 0 log 0 := 0.
double mutual_information(const DiscreteDistribution& p_x, const ConditionalDistribution& w);

double expected_distortion(const DiscreteDistribution& p_x, const ConditionalDistribution& w,
                           const Eigen::MatrixXd& distortion);

/// m-projection onto the product family: row sums times column sums. Affine
/// in the table once the row sums are fixed; accepts signed input.
JointTable m_project_product(const JointTable& joint);

struct FhatDerivatives {
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;
};

/// F-hat[p_y](tau) = sum_x p_x(x) log sum_y p_y(y) exp(tau (c - R(x,y)))
/// and its first two tau-derivatives (tilted mean and variance sums).
FhatDerivatives f_hat(const DiscreteDistribution& p_x, const DiscreteDistribution& p_y,
                      const Eigen::MatrixXd& distortion, double level, double tau);

struct RdSolveResult {
  SolveResult core;
  Eigen::MatrixXd w;          ///< reconstructed conditional, rows(x, y)
  double distortion = std::numeric_limits<double>::quiet_NaN();
  int em_sign = 0;            ///< m-step exponent sign; 0 when not applicable
};

/// Minimization-free iteration over the log-partition system built from the
/// rate-distortion basis (closed-form e-projection). theta_init has length
/// d0. Each iteration costs one closed-form projection.
RdSolveResult rd_solve_minfree(const RdProblem& problem, const SolverConfig& config,
                               double epsilon, const Eigen::VectorXd& theta_init,
                               const NumericSettings& settings = {});

/// Mirror-descent baseline on the same reduced system, beta = 1/gamma;
/// every iteration pays a generic inner convex minimization.
RdSolveResult rd_solve_mirror(const RdProblem& problem, const SolverConfig& config,
                              double epsilon, const Eigen::VectorXd& theta_init,
                              const NumericSettings& settings = {});

/// Alternating-projection baseline; the m-step multiplier is solved by a
/// damped Newton run to gradient tolerance. The exponent sign is selected at
/// startup as the one whose tilted conditional meets the distortion level.
RdSolveResult em_solve(const RdProblem& problem, const SolverConfig& config,
                       const NumericSettings& settings = {});

/// As em_solve, but the m-step performs exactly schedule(t) raw Newton
/// updates from tau = 0; the trace accumulates sum_k schedule(k).
RdSolveResult em_solve_newton(const RdProblem& problem, const SolverConfig& config,
                              const std::function<int(int)>& schedule,
                              const NumericSettings& settings = {});

/// Mixture family over a finite space with an affine m-projection: the
/// general clipped divergence objective. The fixed-constraint terms of the
/// coordinate chart are folded into `offset`.
struct GeneralEmProblem {
  Eigen::MatrixXd g_free;   ///< d0 x n dual functions of the free coordinates
  Eigen::VectorXd offset;   ///< n, affine part of the chart
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> m_projection;
};

/// D(P_eta || m_projection(P_eta)) with (.)_+ clipping inside both logs.
double em_objective_general(const GeneralEmProblem& problem, double epsilon,
                            const Eigen::VectorXd& eta);

}  // namespace bdab
