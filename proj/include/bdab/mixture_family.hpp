#pragma once

#include <Eigen/Dense>

#include "bdab/errors.hpp"
#include "bdab/potential.hpp"

namespace bdab {

/// Canonical mixture family: the last k mixture coordinates are pinned to
/// constants, d_{d0+j} phi(theta) = c_j for j = 1..k.
struct MixtureFamily {
  int free_count = 0;         ///< d0, number of free leading coordinates
  Eigen::VectorXd constants;  ///< c, length k = d - d0 (k >= 1)

  int constraint_count() const { return static_cast<int>(constants.size()); }
  int dimension() const { return free_count + constraint_count(); }
};

inline MixtureFamily make_mixture_family(int free_count, Eigen::VectorXd constants) {
  if (free_count < 0) throw ArgumentError("free_count must be nonnegative");
  if (constants.size() < 1) throw ArgumentError("mixture family needs at least one constraint");
  if (!constants.allFinite()) throw ArgumentError("family constants must be finite");
  return MixtureFamily{free_count, std::move(constants)};
}

/// max_j |d_{d0+j} phi(theta) - c_j|
inline double family_residual(const ConvexPotential& system, const MixtureFamily& family,
                              const NaturalPoint& theta) {
  if (family.dimension() != system.dimension())
    throw ArgumentError("family dimension does not match system dimension");
  const Eigen::VectorXd eta = system.gradient(theta);
  return (eta.tail(family.constraint_count()) - family.constants)
      .cwiseAbs()
      .maxCoeff();
}

inline bool in_family(const ConvexPotential& system, const MixtureFamily& family,
                      const NaturalPoint& theta, double tol) {
  return family_residual(system, family, theta) <= tol;
}

}  // namespace bdab
