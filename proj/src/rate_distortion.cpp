#include "bdab/rate_distortion.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <utility>

#include "bdab/potentials.hpp"

namespace bdab {

namespace {

using Clock = std::chrono::steady_clock;

double clipped_log(double x, double epsilon) { return std::log(std::max(x, epsilon)); }

Eigen::VectorXd flatten(const Eigen::MatrixXd& table) {
  // x-major: n = x * d2 + y
  Eigen::MatrixXd t = table.transpose();
  return Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, int d1, int d2) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), d2, d1).transpose();
}

}  // namespace

DiscreteDistribution make_distribution(Eigen::VectorXd probs) {
  if (probs.size() < 1) throw ArgumentError("distribution must be nonempty");
  if (!probs.allFinite()) throw ArgumentError("distribution entries must be finite");
  if (probs.minCoeff() < 0.0) throw ArgumentError("distribution entries must be nonnegative");
  if (std::abs(probs.sum() - 1.0) > 1e-12) throw ArgumentError("distribution must sum to 1");
  return DiscreteDistribution{std::move(probs)};
}

ConditionalDistribution make_conditional(Eigen::MatrixXd rows) {
  if (rows.rows() < 1 || rows.cols() < 1)
    throw ArgumentError("conditional distribution must be nonempty");
  if (!rows.allFinite()) throw ArgumentError("conditional entries must be finite");
  if (rows.minCoeff() < 0.0) throw ArgumentError("conditional entries must be nonnegative");
  for (int x = 0; x < rows.rows(); ++x)
    if (std::abs(rows.row(x).sum() - 1.0) > 1e-12)
      throw ArgumentError("conditional row " + std::to_string(x) + " must sum to 1");
  return ConditionalDistribution{std::move(rows)};
}

RdProblem make_rd_problem(DiscreteDistribution p_x, Eigen::MatrixXd distortion, double level) {
  const int d1 = static_cast<int>(distortion.rows());
  const int d2 = static_cast<int>(distortion.cols());
  if (p_x.size() != d1) throw ArgumentError("p_x length must match distortion row count");
  if (!distortion.allFinite()) throw ArgumentError("distortion entries must be finite");
  if (d2 < 2 || d1 * (d2 - 1) < 2)
    throw ArgumentError("alphabet too small: need d1*(d2-1) >= 2");
  if (p_x.probs.minCoeff() <= 0.0)
    throw ArgumentError("p_x entries must be positive");
  if (std::abs(distortion(d1 - 1, d2 - 1) - distortion(d1 - 1, d2 - 2)) <= 1e-12)
    throw ArgumentError("distortion must satisfy R(d1,d2) != R(d1,d2-1)");
  const double dmin = p_x.probs.dot(distortion.rowwise().minCoeff());
  const double dmax = p_x.probs.dot(distortion.rowwise().maxCoeff());
  if (!(level > dmin && level < dmax))
    throw ArgumentError("c must lie strictly between the minimum (" + std::to_string(dmin) +
                        ") and maximum (" + std::to_string(dmax) +
                        ") achievable expected distortion");
  return RdProblem{std::move(p_x), std::move(distortion), level};
}

RdBasis build_rd_basis(const RdProblem& problem) {
  const int d1 = problem.d1();
  const int d2 = problem.d2();
  const Eigen::MatrixXd& R = problem.distortion;
  const double den = R(d1 - 1, d2 - 2) - R(d1 - 1, d2 - 1);
  if (std::abs(den) <= 1e-12)
    throw ArgumentError("distortion must satisfy R(d1,d2) != R(d1,d2-1)");

  RdBasis basis;
  basis.d0 = d1 * (d2 - 1) - 1;
  const int n = d1 * d2;
  basis.f = Eigen::MatrixXd::Zero(basis.d0, n);
  basis.g = Eigen::MatrixXd::Zero(basis.d0, n);
  auto cell = [d2](int x, int y) { return x * d2 + y; };

  // f_{(i-1)(d2-1)+j} = delta_i(x) delta_j(y), i = 1..d1-1, j = 1..d2-1;
  // the last block covers x = d1 with j = 1..d2-2 only.
  for (int i = 0; i + 1 < d1; ++i)
    for (int j = 0; j + 1 < d2; ++j) basis.f(i * (d2 - 1) + j, cell(i, j)) = 1.0;
  for (int j = 0; j + 2 < d2; ++j)
    basis.f((d1 - 1) * (d2 - 1) + j, cell(d1 - 1, j)) = 1.0;

  auto fill_dual = [&](int row, int i, int j) {
    basis.g(row, cell(i, j)) += 1.0;
    basis.g(row, cell(i, d2 - 1)) -= 1.0;
    const double ratio = (R(i, j) - R(i, d2 - 1)) / den;
    basis.g(row, cell(d1 - 1, d2 - 2)) -= ratio;
    basis.g(row, cell(d1 - 1, d2 - 1)) += ratio;
  };
  for (int i = 0; i + 1 < d1; ++i)
    for (int j = 0; j + 1 < d2; ++j) fill_dual(i * (d2 - 1) + j, i, j);
  for (int j = 0; j + 2 < d2; ++j) fill_dual((d1 - 1) * (d2 - 1) + j, d1 - 1, j);

  basis.offset = Eigen::MatrixXd::Zero(d1, d2);
  basis.offset.col(d2 - 1) = problem.p_x.probs;
  const double shift = (problem.level - problem.p_x.probs.dot(R.col(d2 - 1))) / den;
  basis.offset(d1 - 1, d2 - 2) += shift;
  basis.offset(d1 - 1, d2 - 1) -= shift;
  return basis;
}

JointTable joint_from_eta(const RdProblem& problem, const RdBasis& basis,
                          const Eigen::VectorXd& eta) {
  if (eta.size() != basis.d0) throw ArgumentError("eta length must equal d0");
  const Eigen::VectorXd flat = basis.g.transpose() * eta + flatten(basis.offset);
  return JointTable{unflatten(flat, problem.d1(), problem.d2())};
}

Eigen::VectorXd eta_from_joint(const RdBasis& basis, const JointTable& joint) {
  return basis.f * flatten(joint.values);
}

double rd_objective(const RdProblem& problem, const RdBasis& basis, double epsilon,
                    const Eigen::VectorXd& eta) {
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  const JointTable joint = joint_from_eta(problem, basis, eta);
  const Eigen::VectorXd marg = joint.values.colwise().sum();
  double value = 0.0;
  for (int x = 0; x < problem.d1(); ++x)
    for (int y = 0; y < problem.d2(); ++y)
      value += joint.values(x, y) * clipped_log(joint.values(x, y), epsilon);
  for (int x = 0; x < problem.d1(); ++x)
    value -= problem.p_x.probs[x] * std::log(problem.p_x.probs[x]);
  for (int y = 0; y < problem.d2(); ++y) value -= marg[y] * clipped_log(marg[y], epsilon);
  return value;
}

Eigen::VectorXd rd_omega(const RdProblem& problem, const RdBasis& basis, double epsilon,
                         const Eigen::VectorXd& eta) {
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  const int d1 = problem.d1();
  const int d2 = problem.d2();
  const JointTable joint = joint_from_eta(problem, basis, eta);
  const Eigen::VectorXd marg = joint.values.colwise().sum();

  Eigen::MatrixXd logratio(d1, d2);
  for (int x = 0; x < d1; ++x)
    for (int y = 0; y < d2; ++y)
      logratio(x, y) = clipped_log(joint.values(x, y), epsilon) -
                       std::log(problem.p_x.probs[x]) - clipped_log(marg[y], epsilon);
  const Eigen::VectorXd flat = flatten(logratio);

  Eigen::VectorXd omega(basis.d0 + 1);
  omega.head(basis.d0) = basis.g * flat;
  omega[basis.d0] = flatten(basis.offset).dot(flat);
  return omega;
}

double mutual_information(const DiscreteDistribution& p_x, const ConditionalDistribution& w) {
  if (w.rows.rows() != p_x.size())
    throw ArgumentError("conditional row count must match p_x length");
  const Eigen::VectorXd p_y = w.rows.transpose() * p_x.probs;
  double info = 0.0;
  for (int x = 0; x < w.rows.rows(); ++x)
    for (int y = 0; y < w.rows.cols(); ++y)
      if (w.rows(x, y) > 0.0 && p_x.probs[x] > 0.0)
        info += p_x.probs[x] * w.rows(x, y) * std::log(w.rows(x, y) / p_y[y]);
  return info;
}

double expected_distortion(const DiscreteDistribution& p_x, const ConditionalDistribution& w,
                           const Eigen::MatrixXd& distortion) {
  if (w.rows.rows() != p_x.size() || w.rows.rows() != distortion.rows() ||
      w.rows.cols() != distortion.cols())
    throw ArgumentError("shape mismatch between p_x, conditional and distortion");
  return (p_x.probs.asDiagonal() * w.rows).cwiseProduct(distortion).sum();
}

JointTable m_project_product(const JointTable& joint) {
  const Eigen::VectorXd row_sums = joint.values.rowwise().sum();
  const Eigen::VectorXd col_sums = joint.values.colwise().sum();
  return JointTable{row_sums * col_sums.transpose()};
}

FhatDerivatives f_hat(const DiscreteDistribution& p_x, const DiscreteDistribution& p_y,
                      const Eigen::MatrixXd& distortion, double level, double tau) {
  if (p_x.size() != distortion.rows() || p_y.size() != distortion.cols())
    throw ArgumentError("shape mismatch between p_x, p_y and distortion");
  if (p_y.probs.minCoeff() <= 0.0) throw ArgumentError("p_y must be strictly positive");
  FhatDerivatives out;
  for (int x = 0; x < p_x.size(); ++x) {
    const Eigen::ArrayXd exponent = tau * (level - distortion.row(x).transpose().array());
    const double shift = exponent.maxCoeff();
    const Eigen::ArrayXd weight = p_y.probs.array() * (exponent - shift).exp();
    const double z = weight.sum();
    const Eigen::ArrayXd diff = level - distortion.row(x).transpose().array();
    const double mean = (weight * diff).sum() / z;
    const double second_moment = (weight * diff.square()).sum() / z;
    out.value += p_x.probs[x] * (std::log(z) + shift);
    out.first += p_x.probs[x] * mean;
    out.second += p_x.probs[x] * (second_moment - mean * mean);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Solvers

namespace {

Eigen::MatrixXd conditional_from_joint(const RdProblem& problem, const JointTable& joint) {
  Eigen::MatrixXd w = joint.values;
  for (int x = 0; x < problem.d1(); ++x) w.row(x) /= problem.p_x.probs[x];
  return w;
}

RdSolveResult reduced_system_solve(const RdProblem& problem, const SolverConfig& config,
                                   double epsilon, const Eigen::VectorXd& theta_init,
                                   const NumericSettings& settings, bool mirror) {
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  const RdBasis basis = build_rd_basis(problem);
  if (theta_init.size() != basis.d0)
    throw ArgumentError("theta_init length must equal d0 = d1*(d2-1)-1");

  const LogPartitionSystem system(make_feature_basis(basis.f));
  const MixtureFamily family = make_mixture_family(basis.d0, Eigen::VectorXd::Ones(1));

  Objective objective;
  objective.dimension = basis.d0 + 1;
  objective.omega_mixture = [&](const MixturePoint& eta) {
    return rd_omega(problem, basis, epsilon, eta.head(basis.d0));
  };
  objective.omega = [&](const NaturalPoint& theta) {
    return objective.omega_mixture(system.gradient(theta));
  };
  const MinEntryProbe probe = [&](const MixturePoint& eta) {
    return joint_from_eta(problem, basis, eta.head(basis.d0)).values.minCoeff();
  };

  Eigen::VectorXd lifted(basis.d0 + 1);
  lifted.head(basis.d0) = theta_init;
  lifted[basis.d0] = 0.0;

  RdSolveResult result;
  result.core = mirror ? mirror_solve(system, family, objective, config, lifted, settings, probe)
                       : ab_solve(system, family, objective, config, lifted, settings, probe);
  if (result.core.eta.size() == basis.d0 + 1) {
    const JointTable joint =
        joint_from_eta(problem, basis, result.core.eta.head(basis.d0));
    result.w = conditional_from_joint(problem, joint);
    result.distortion = joint.values.cwiseProduct(problem.distortion).sum();
  }
  return result;
}

/// Damped Newton on F-hat' run to gradient tolerance.
double solve_tau(const RdProblem& problem, const DiscreteDistribution& p_y,
                 const NumericSettings& settings, int* iterations) {
  double tau = 0.0;
  FhatDerivatives d = f_hat(problem.p_x, p_y, problem.distortion, problem.level, tau);
  int used = 0;
  for (; used < settings.newton_max_iter; ++used) {
    if (std::abs(d.first) <= settings.newton_grad_tol) break;
    if (d.second <= 0.0)
      throw ConvergenceError("m-step: F-hat has no curvature", std::abs(d.first));
    double step = -d.first / d.second;
    double scale = 1.0;
    while (scale > 1e-14) {
      const FhatDerivatives trial =
          f_hat(problem.p_x, p_y, problem.distortion, problem.level, tau + scale * step);
      if (std::abs(trial.first) < std::abs(d.first)) {
        tau += scale * step;
        d = trial;
        break;
      }
      scale *= 0.5;
    }
    if (scale <= 1e-14) break;
  }
  if (iterations) *iterations = used;
  if (std::abs(d.first) > settings.newton_grad_tol)
    throw ConvergenceError("m-step: tau Newton did not converge", std::abs(d.first));
  return tau;
}

Eigen::MatrixXd tilted_conditional(const RdProblem& problem, const DiscreteDistribution& p_y,
                                   int sign, double tau) {
  const int d1 = problem.d1();
  const int d2 = problem.d2();
  Eigen::MatrixXd w(d1, d2);
  for (int x = 0; x < d1; ++x) {
    const Eigen::ArrayXd exponent = sign * tau * problem.distortion.row(x).transpose().array();
    const double shift = exponent.maxCoeff();
    const Eigen::ArrayXd row = p_y.probs.array() * (exponent - shift).exp();
    w.row(x) = (row / row.sum()).matrix();
  }
  return w;
}

RdSolveResult em_solve_impl(const RdProblem& problem, const SolverConfig& config,
                            const std::function<int(int)>& schedule,
                            const NumericSettings& settings) {
  if (!(config.gamma > 0.0) || config.max_iterations < 1 || config.trace_every < 1)
    throw ArgumentError("solver config: invalid field");
  const auto start = Clock::now();
  const int d2 = problem.d2();
  DiscreteDistribution p_y{Eigen::VectorXd::Constant(d2, 1.0 / d2)};

  RdSolveResult result;
  result.core.reason = Termination::kMaxIterations;

  // Resolve the m-step exponent sign once: the tilted conditional must meet
  // the distortion level at the stationary multiplier.
  {
    const double tau0 = solve_tau(problem, p_y, settings, nullptr);
    double best_gap = std::numeric_limits<double>::infinity();
    for (int sign : {-1, +1}) {
      const Eigen::MatrixXd w = tilted_conditional(problem, p_y, sign, tau0);
      const double gap = std::abs(
          (problem.p_x.probs.asDiagonal() * w).cwiseProduct(problem.distortion).sum() -
          problem.level);
      if (gap < best_gap) {
        best_gap = gap;
        result.em_sign = sign;
      }
    }
  }

  std::int64_t cumulative_inner = 0;
  double value = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd w;

  for (int t = 1; t <= config.max_iterations; ++t) {
    double tau = 0.0;
    if (schedule) {
      const int steps = schedule(t);
      if (steps < 1) throw ArgumentError("schedule must return at least 1");
      for (int k = 0; k < steps; ++k) {
        const FhatDerivatives d =
            f_hat(problem.p_x, p_y, problem.distortion, problem.level, tau);
        if (std::abs(d.second) < 1e-300) break;
        tau -= d.first / d.second;
      }
      cumulative_inner += steps;
    } else {
      int used = 0;
      try {
        tau = solve_tau(problem, p_y, settings, &used);
      } catch (const ConvergenceError& e) {
        result.core.reason = Termination::kError;
        result.core.message = std::string("m-step failed at iteration ") +
                              std::to_string(t) + ": " + e.what();
        break;
      }
      cumulative_inner += std::max(1, used);
    }

    w = tilted_conditional(problem, p_y, result.em_sign, tau);
    // e-step
    p_y.probs = w.transpose() * problem.p_x.probs;

    const ConditionalDistribution cond{w};
    const double value_next = mutual_information(problem.p_x, cond);
    const double dist = expected_distortion(problem.p_x, cond, problem.distortion);
    const JointTable joint{problem.p_x.probs.asDiagonal() * w};

    const bool converged =
        t > 1 && std::abs(value - value_next) <
                     config.objective_tolerance * std::max(1.0, std::abs(value));
    value = value_next;
    result.core.iterations = t;
    if (t % config.trace_every == 0 || converged || t == config.max_iterations) {
      TraceRecord rec;
      rec.iteration = t;
      rec.objective = value;
      rec.constraint_residual = std::abs(dist - problem.level);
      rec.min_entry = joint.values.minCoeff();
      rec.cumulative_inner = cumulative_inner;
      rec.elapsed_ns =
          std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
      result.core.trace.records.push_back(std::move(rec));
    }
    if (converged) {
      result.core.reason = Termination::kTolerance;
      break;
    }
  }

  result.w = w;
  result.core.objective = value;
  if (w.size() > 0) {
    result.distortion =
        (problem.p_x.probs.asDiagonal() * w).cwiseProduct(problem.distortion).sum();
  }
  return result;
}

}  // namespace

RdSolveResult rd_solve_minfree(const RdProblem& problem, const SolverConfig& config,
                               double epsilon, const Eigen::VectorXd& theta_init,
                               const NumericSettings& settings) {
  return reduced_system_solve(problem, config, epsilon, theta_init, settings, false);
}

RdSolveResult rd_solve_mirror(const RdProblem& problem, const SolverConfig& config,
                              double epsilon, const Eigen::VectorXd& theta_init,
                              const NumericSettings& settings) {
  return reduced_system_solve(problem, config, epsilon, theta_init, settings, true);
}

RdSolveResult em_solve(const RdProblem& problem, const SolverConfig& config,
                       const NumericSettings& settings) {
  return em_solve_impl(problem, config, nullptr, settings);
}

RdSolveResult em_solve_newton(const RdProblem& problem, const SolverConfig& config,
                              const std::function<int(int)>& schedule,
                              const NumericSettings& settings) {
  if (!schedule) throw ArgumentError("em_solve_newton: schedule is required");
  return em_solve_impl(problem, config, schedule, settings);
}

double em_objective_general(const GeneralEmProblem& problem, double epsilon,
                            const Eigen::VectorXd& eta) {
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  if (eta.size() != problem.g_free.rows())
    throw ArgumentError("eta length must match the free dual count");
  const Eigen::VectorXd table = problem.g_free.transpose() * eta + problem.offset;
  const Eigen::VectorXd projected = problem.m_projection(table);
  if (projected.size() != table.size())
    throw ArgumentError("m_projection must preserve the table size");
  double value = 0.0;
  for (int i = 0; i < table.size(); ++i)
    value += table[i] * (clipped_log(table[i], epsilon) - clipped_log(projected[i], epsilon));
  return value;
}

}  // namespace bdab
