#include "bdab/solver.hpp"

#include <chrono>
#include <cmath>
#include <utility>

#include "bdab/newton.hpp"

namespace bdab {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ns_since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

void validate_config(const SolverConfig& config) {
  if (!(config.gamma > 0.0)) throw ArgumentError("solver config: gamma must be positive");
  if (config.max_iterations < 1)
    throw ArgumentError("solver config: max_iterations must be at least 1");
  if (config.trace_every < 1) throw ArgumentError("solver config: trace_every must be >= 1");
}

}  // namespace

std::string to_string(Termination reason) {
  switch (reason) {
    case Termination::kTolerance:
      return "tolerance";
    case Termination::kMaxIterations:
      return "max-iter";
    case Termination::kError:
      return "error";
  }
  return "error";
}

Objective objective_from_mixture_form(
    std::shared_ptr<const ConvexPotential> system,
    std::function<Eigen::VectorXd(const MixturePoint&)> omega_mixture) {
  if (!system) throw ArgumentError("objective_from_mixture_form: null potential");
  Objective objective;
  objective.dimension = system->dimension();
  objective.omega_mixture = omega_mixture;
  objective.omega = [system = std::move(system),
                     omega_mixture = std::move(omega_mixture)](const NaturalPoint& theta) {
    return omega_mixture(system->gradient(theta));
  };
  return objective;
}

double objective_value(const ConvexPotential& system, const Objective& objective,
                       const NaturalPoint& theta) {
  return system.gradient(theta).dot(objective.omega(theta));
}

NaturalPoint f_gamma(const Objective& objective, double gamma, const NaturalPoint& theta) {
  if (!(gamma > 0.0)) throw ArgumentError("f_gamma: gamma must be positive");
  return theta - objective.omega(theta) / gamma;
}

NaturalPoint ab_step(const ConvexPotential& system, const MixtureFamily& family,
                     const Objective& objective, double gamma, const NaturalPoint& theta,
                     const NumericSettings& settings) {
  return e_project(system, family, f_gamma(objective, gamma, theta), settings);
}

SolveResult ab_solve(const ConvexPotential& system, const MixtureFamily& family,
                     const Objective& objective, const SolverConfig& config,
                     const NaturalPoint& theta_init, const NumericSettings& settings,
                     const MinEntryProbe& min_entry) {
  validate_config(config);
  const auto start = Clock::now();
  const int k = family.constraint_count();

  SolveResult result;
  std::int64_t cumulative_inner = 0;

  auto record = [&](std::int64_t iter, double objective_value, const Eigen::VectorXd& eta,
                    const NaturalPoint& theta, bool gamma_ok) {
    TraceRecord rec;
    rec.iteration = iter;
    rec.objective = objective_value;
    rec.constraint_residual = (eta.tail(k) - family.constants).cwiseAbs().maxCoeff();
    if (min_entry) rec.min_entry = min_entry(eta);
    rec.cumulative_inner = cumulative_inner;
    rec.elapsed_ns = ns_since(start);
    rec.theta = theta;
    rec.gamma_condition_ok = gamma_ok;
    result.trace.records.push_back(std::move(rec));
  };

  NaturalPoint theta;
  try {
    int inner = 0;
    theta = e_project(system, family, theta_init, settings, &inner);
  } catch (const ConvergenceError& e) {
    result.reason = Termination::kError;
    result.message = std::string("initial projection failed: ") + e.what();
    return result;
  }

  Eigen::VectorXd eta = system.gradient(theta);
  Eigen::VectorXd om = objective.omega(theta);
  double value = eta.dot(om);
  record(0, value, eta, theta, true);

  result.reason = Termination::kMaxIterations;
  for (int t = 1; t <= config.max_iterations; ++t) {
    NaturalPoint theta_next;
    int inner = 0;
    try {
      theta_next = e_project(system, family, theta - om / config.gamma, settings, &inner);
    } catch (const ConvergenceError& e) {
      result.reason = Termination::kError;
      result.message = std::string("projection failed at iteration ") + std::to_string(t) +
                       ": " + e.what();
      break;
    }
    cumulative_inner += inner;

    const Eigen::VectorXd eta_next = system.gradient(theta_next);
    const Eigen::VectorXd om_next = objective.omega(theta_next);
    const double value_next = eta_next.dot(om_next);

    // Gamma condition, both argument orders (descent needs the reversed one,
    // the convergence bound the forward one).
    const double phi = system.value(theta);
    const double phi_next = system.value(theta_next);
    const double div_fwd = eta.dot(theta - theta_next) - phi + phi_next;
    const double div_rev = eta_next.dot(theta_next - theta) - phi_next + phi;
    const double domega_fwd = eta.dot(om - om_next);
    const double domega_rev = eta_next.dot(om_next - om);
    const bool gamma_ok = domega_fwd <= config.gamma * div_fwd + 1e-12 &&
                          domega_rev <= config.gamma * div_rev + 1e-12;
    if (!gamma_ok) ++result.trace.gamma_condition_failures;

    const bool converged =
        std::abs(value - value_next) < config.objective_tolerance * std::max(1.0, std::abs(value));
    theta = std::move(theta_next);
    eta = eta_next;
    om = om_next;
    value = value_next;
    result.iterations = t;
    if (t % config.trace_every == 0 || converged || t == config.max_iterations)
      record(t, value, eta, theta, gamma_ok);
    if (converged) {
      result.reason = Termination::kTolerance;
      break;
    }
  }

  result.theta = theta;
  result.eta = eta;
  result.objective = value;
  return result;
}

MixturePoint mirror_step(const ConvexPotential& system, const MixtureFamily& family,
                         const Objective& objective, double beta, const MixturePoint& eta,
                         const NumericSettings& settings, int* inner_iterations) {
  if (!(beta > 0.0)) throw ArgumentError("mirror_step: beta must be positive");
  if (family.dimension() != system.dimension())
    throw ArgumentError("family dimension does not match system dimension");
  const int d0 = family.free_count;
  const int k = family.constraint_count();

  const NaturalPoint theta_bar = mixture_to_natural(system, eta, settings);
  const Eigen::VectorXd slope = objective.omega(theta_bar).head(d0);

  auto assemble = [&](const Eigen::VectorXd& w) {
    MixturePoint full(system.dimension());
    full.head(d0) = w;
    full.tail(k) = family.constants;
    return full;
  };
  // theta(eta_w) is needed by value, gradient and Hessian alike; cache the
  // last inversion keyed on w.
  Eigen::VectorXd cached_w;
  NaturalPoint cached_theta;
  auto invert = [&](const Eigen::VectorXd& w) -> const NaturalPoint& {
    if (cached_w.size() == w.size() && (cached_w.array() == w.array()).all())
      return cached_theta;
    cached_theta = mixture_to_natural(system, assemble(w), settings, &theta_bar);
    cached_w = w;
    return cached_theta;
  };

  // Objective A(w) = <w, slope> + (1/beta) D^phi(theta(w, c) || theta_bar);
  // in mixture coordinates the divergence term is phi*(eta_w) - <eta_w,
  // theta_bar> + phi(theta_bar), so its exact gradient is the free block of
  // theta(eta_w) - theta_bar and its exact Hessian the free block of the
  // inverse potential Hessian.
  auto value = [&](const Eigen::VectorXd& w) -> double {
    try {
      const NaturalPoint& t = invert(w);
      return w.dot(slope) + bregman_divergence(system, t, theta_bar) / beta;
    } catch (const ConvergenceError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  auto gradient = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    const NaturalPoint& t = invert(w);
    return slope + (t.head(d0) - theta_bar.head(d0)) / beta;
  };
  auto hess = [&](const Eigen::VectorXd& w) -> Eigen::MatrixXd {
    const NaturalPoint& t = invert(w);
    const Eigen::MatrixXd hess_inv =
        system.hessian(t).ldlt().solve(Eigen::MatrixXd::Identity(system.dimension(),
                                                                 system.dimension()));
    return hess_inv.topLeftCorner(d0, d0) / beta;
  };

  auto result = minimize_newton(value, gradient, hess,
                                [](const Eigen::VectorXd&) { return true; },
                                eta.head(d0), settings);
  if (!result.converged)
    throw ConvergenceError("mirror_step: inner argmin did not converge", result.grad_norm);
  if (inner_iterations) *inner_iterations = std::max(1, result.iterations);
  return assemble(result.x);
}

SolveResult mirror_solve(const ConvexPotential& system, const MixtureFamily& family,
                         const Objective& objective, const SolverConfig& config,
                         const NaturalPoint& theta_init, const NumericSettings& settings,
                         const MinEntryProbe& min_entry) {
  validate_config(config);
  const auto start = Clock::now();
  const int k = family.constraint_count();
  const double beta = 1.0 / config.gamma;

  SolveResult result;
  std::int64_t cumulative_inner = 0;

  auto record = [&](std::int64_t iter, double objective_value, const Eigen::VectorXd& eta,
                    const NaturalPoint& theta) {
    TraceRecord rec;
    rec.iteration = iter;
    rec.objective = objective_value;
    rec.constraint_residual = (eta.tail(k) - family.constants).cwiseAbs().maxCoeff();
    if (min_entry) rec.min_entry = min_entry(eta);
    rec.cumulative_inner = cumulative_inner;
    rec.elapsed_ns = ns_since(start);
    rec.theta = theta;
    result.trace.records.push_back(std::move(rec));
  };

  NaturalPoint theta;
  try {
    theta = e_project(system, family, theta_init, settings);
  } catch (const ConvergenceError& e) {
    result.reason = Termination::kError;
    result.message = std::string("initial projection failed: ") + e.what();
    return result;
  }
  MixturePoint eta = system.gradient(theta);
  double value = eta.dot(objective.omega(theta));
  record(0, value, eta, theta);

  result.reason = Termination::kMaxIterations;
  for (int t = 1; t <= config.max_iterations; ++t) {
    MixturePoint eta_next;
    int inner = 0;
    try {
      eta_next = mirror_step(system, family, objective, beta, eta, settings, &inner);
    } catch (const ConvergenceError& e) {
      result.reason = Termination::kError;
      result.message = std::string("mirror step failed at iteration ") + std::to_string(t) +
                       ": " + e.what();
      break;
    }
    cumulative_inner += inner;
    const NaturalPoint theta_next = mixture_to_natural(system, eta_next, settings, &theta);
    const double value_next = system.gradient(theta_next).dot(objective.omega(theta_next));

    const bool converged =
        std::abs(value - value_next) < config.objective_tolerance * std::max(1.0, std::abs(value));
    theta = theta_next;
    eta = eta_next;
    value = value_next;
    result.iterations = t;
    if (t % config.trace_every == 0 || converged || t == config.max_iterations)
      record(t, value, eta, theta);
    if (converged) {
      result.reason = Termination::kTolerance;
      break;
    }
  }

  result.theta = theta;
  result.eta = eta;
  result.objective = value;
  return result;
}

double extended_objective(const ConvexPotential& system, const Objective& objective,
                          double gamma, const NaturalPoint& theta,
                          const NaturalPoint& theta_prime) {
  return gamma * bregman_divergence(system, theta, theta_prime) +
         system.gradient(theta).dot(objective.omega(theta_prime));
}

double d_omega(const ConvexPotential& system, const Objective& objective,
               const NaturalPoint& theta, const NaturalPoint& theta_prime) {
  return system.gradient(theta).dot(objective.omega(theta) - objective.omega(theta_prime));
}

double estimate_gamma(const ConvexPotential& system, const Objective& objective,
                      const std::vector<std::pair<NaturalPoint, NaturalPoint>>& samples,
                      const NumericSettings& settings) {
  if (samples.empty()) throw ArgumentError("estimate_gamma: empty sample list");
  double max_ratio = -std::numeric_limits<double>::infinity();
  int kept = 0;
  for (const auto& [a, b] : samples) {
    const double div = bregman_divergence(system, a, b);
    if (div < settings.degenerate_divergence) continue;
    max_ratio = std::max(max_ratio, d_omega(system, objective, a, b) / div);
    ++kept;
  }
  if (kept == 0) throw ArgumentError("estimate_gamma: all sample pairs are degenerate");
  return 1.2 * std::max(0.0, max_ratio);
}

}  // namespace bdab
