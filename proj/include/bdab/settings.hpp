#pragma once

namespace bdab {

/// Shared numeric knobs. Defaults are the library-wide contract; every
/// solver entry point accepts an override.
struct NumericSettings {
  /// Infinity-norm gradient tolerance for inner Newton solves
  /// (coordinate inversion, e-projection, mirror inner argmin).
  double newton_grad_tol = 1e-12;
  /// Iteration cap for inner Newton solves.
  int newton_max_iter = 200;
  /// Slack used when testing mixture-family membership.
  double membership_tol = 1e-6;
  /// Pairs with Bregman divergence below this are skipped when sampling
  /// gamma estimates.
  double degenerate_divergence = 1e-12;
};

}  // namespace bdab
