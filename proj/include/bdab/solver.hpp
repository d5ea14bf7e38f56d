#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "bdab/geometry.hpp"
#include "bdab/mixture_family.hpp"
#include "bdab/potential.hpp"
#include "bdab/settings.hpp"

namespace bdab {

/// The gradient-like map Omega whose pairing with eta gives the objective:
/// G(theta) = sum_j eta_j(theta) Omega^j(theta).
struct Objective {
  int dimension = 0;
  /// Omega in natural coordinates (required).
  std::function<Eigen::VectorXd(const NaturalPoint&)> omega;
  /// Omega-tilde in mixture coordinates (optional; empty if absent).
  std::function<Eigen::VectorXd(const MixturePoint&)> omega_mixture;

  bool has_mixture_form() const { return static_cast<bool>(omega_mixture); }
};

/// Builds the natural-coordinate oracle from a mixture-form one.
Objective objective_from_mixture_form(
    std::shared_ptr<const ConvexPotential> system,
    std::function<Eigen::VectorXd(const MixturePoint&)> omega_mixture);

/// G(theta) = <eta(theta), Omega(theta)>.
double objective_value(const ConvexPotential& system, const Objective& objective,
                       const NaturalPoint& theta);

struct SolverConfig {
  double gamma = 50.0;
  int max_iterations = 10000;
  /// Stop when |G_t - G_{t+1}| / max(1, |G_t|) falls below this.
  double objective_tolerance = 1e-10;
  int trace_every = 1;
};

enum class Termination { kTolerance, kMaxIterations, kError };

std::string to_string(Termination reason);

struct TraceRecord {
  std::int64_t iteration = 0;
  double objective = 0.0;
  double constraint_residual = 0.0;
  /// Smallest entry of the underlying table for solvers that track one;
  /// NaN otherwise.
  double min_entry = std::numeric_limits<double>::quiet_NaN();
  std::int64_t cumulative_inner = 0;
  std::int64_t elapsed_ns = 0;
  Eigen::VectorXd theta;
  /// Per-step gamma condition D_Omega <= gamma D^phi (both argument orders);
  /// monotone descent is only guaranteed at steps where this held.
  bool gamma_condition_ok = true;
};

struct IterationTrace {
  std::vector<TraceRecord> records;
  int gamma_condition_failures = 0;
};

struct SolveResult {
  NaturalPoint theta;
  MixturePoint eta;
  double objective = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  Termination reason = Termination::kError;
  IterationTrace trace;
  std::string message;  ///< diagnostic text when reason == kError
};

/// Probe evaluated at each recorded iterate to fill TraceRecord::min_entry.
using MinEntryProbe = std::function<double(const MixturePoint&)>;

/// F_gamma(theta) = theta - (1/gamma) Omega(theta).
NaturalPoint f_gamma(const Objective& objective, double gamma, const NaturalPoint& theta);

/// One Arimoto-Blahut step: e_project(F_gamma(theta)).
NaturalPoint ab_step(const ConvexPotential& system, const MixtureFamily& family,
                     const Objective& objective, double gamma, const NaturalPoint& theta,
                     const NumericSettings& settings = {});

/// Bregman-divergence Arimoto-Blahut iteration. The initial point is
/// e-projected onto the family before the loop. A projection failure returns
/// an error result carrying the partial trace.
SolveResult ab_solve(const ConvexPotential& system, const MixtureFamily& family,
                     const Objective& objective, const SolverConfig& config,
                     const NaturalPoint& theta_init, const NumericSettings& settings = {},
                     const MinEntryProbe& min_entry = {});

/// One mirror-descent step: argmin over the family's mixture parameters of
/// sum_j eta'_j dG/deta_j(eta) + (1/beta) D^phi(theta(eta') || theta(eta)),
/// solved by a generic inner Newton minimization (never the closed form).
MixturePoint mirror_step(const ConvexPotential& system, const MixtureFamily& family,
                         const Objective& objective, double beta, const MixturePoint& eta,
                         const NumericSettings& settings = {},
                         int* inner_iterations = nullptr);

/// Mirror-descent loop with beta = 1/config.gamma and the ab_solve stopping
/// rule; the comparison baseline for the closed-form iteration.
SolveResult mirror_solve(const ConvexPotential& system, const MixtureFamily& family,
                         const Objective& objective, const SolverConfig& config,
                         const NaturalPoint& theta_init, const NumericSettings& settings = {},
                         const MinEntryProbe& min_entry = {});

/// Extended objective J_gamma(theta, theta') = gamma D^phi(theta || theta')
/// + sum_j eta_j(theta) Omega^j(theta'); J_gamma(theta, theta) = G(theta).
double extended_objective(const ConvexPotential& system, const Objective& objective,
                          double gamma, const NaturalPoint& theta,
                          const NaturalPoint& theta_prime);

/// D_Omega(theta || theta') = sum_j eta_j(theta) (Omega^j(theta) - Omega^j(theta')).
double d_omega(const ConvexPotential& system, const Objective& objective,
               const NaturalPoint& theta, const NaturalPoint& theta_prime);

/// Sampled estimate of the smallest admissible gamma: 1.2 times the largest
/// ratio D_Omega / D^phi over the sample pairs (degenerate pairs skipped).
double estimate_gamma(const ConvexPotential& system, const Objective& objective,
                      const std::vector<std::pair<NaturalPoint, NaturalPoint>>& samples,
                      const NumericSettings& settings = {});

}  // namespace bdab
