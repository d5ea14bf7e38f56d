#pragma once

#include <Eigen/Dense>
#include <memory>

#include "bdab/mixture_family.hpp"
#include "bdab/potential.hpp"
#include "bdab/settings.hpp"

namespace bdab {

/// eta(theta) = grad phi(theta).
MixturePoint natural_to_mixture(const ConvexPotential& system, const NaturalPoint& theta);

/// Inverse coordinate map. Uses the dual gradient when the potential has a
/// closed-form dual, otherwise damped Newton on phi(theta) - <eta, theta>
/// started from `warm_start` (zero when omitted).
NaturalPoint mixture_to_natural(const ConvexPotential& system, const MixturePoint& eta,
                                const NumericSettings& settings = {},
                                const NaturalPoint* warm_start = nullptr);

/// D^phi(theta1 || theta2) = <grad phi(theta1), theta1 - theta2> - phi(theta1) + phi(theta2).
double bregman_divergence(const ConvexPotential& system, const NaturalPoint& theta1,
                          const NaturalPoint& theta2);

/// D^{phi*}(eta1 || eta2), the divergence of the Legendre dual. Satisfies
/// D^{phi*}(eta(theta2) || eta(theta1)) = D^phi(theta1 || theta2).
double dual_divergence(const ConvexPotential& system, const MixturePoint& eta1,
                       const MixturePoint& eta2, const NumericSettings& settings = {});

/// e-projection onto the family: argmin_{theta' in M} D^phi(theta' || theta_bar).
/// Keeps the leading d0 natural coordinates of theta_bar and solves for the
/// trailing ones, through the potential's closed form when advertised and
/// damped Newton otherwise. `inner_iterations`, when non-null, receives the
/// iteration count spent by the solve (1 for the closed form).
NaturalPoint e_project(const ConvexPotential& system, const MixtureFamily& family,
                       const NaturalPoint& theta_bar, const NumericSettings& settings = {},
                       int* inner_iterations = nullptr);

struct CanonicalizedSystem {
  std::shared_ptr<const ConvexPotential> potential;  ///< theta_bar -> phi(U theta_bar)
  MixtureFamily family;
};

/// Reparameterize by an invertible U so that the constraints encoded in the
/// trailing rows of U become canonical: the returned potential is
/// phi compose U and the family pins its last k mixture coordinates to c.
CanonicalizedSystem canonicalize(std::shared_ptr<const ConvexPotential> system,
                                 const Eigen::MatrixXd& U, const Eigen::VectorXd& constants);

}  // namespace bdab
