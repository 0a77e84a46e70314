#pragma once

#include <cstddef>

namespace routed_bell {

struct RobustnessInput {
  std::size_t n_copies = 1;
  double epsilon = 0.0;  ///< Bell-violation gap
  double f_value = 0.0;  ///< self-testing error f(N, epsilon), supplied by the caller
  bool linear_translation = false;

  /// epsilon = 0 with a nonzero f is allowed but suspicious.
  bool inconsistent() const { return epsilon == 0.0 && f_value != 0.0; }
};

/// delta = 2^{2N+1} (f^2 + 2f) + 2^{4N} (f^2 + 2f)^2
double delta_bound(const RobustnessInput& input);

struct RobustEta {
  double delta = 0.0;
  double q = 0.0;  ///< 1/sqrt2 + sqrt(delta)
  double eta_star = 0.0;
};

/// Robust critical efficiency with delta taken from delta_bound.
RobustEta robust_eta_star(const RobustnessInput& input);

/// Same, with delta given directly (f_value is ignored).
RobustEta robust_eta_star(const RobustnessInput& input, double delta);

/// (1 - 1/sqrt2) + k (1/sqrt2 + sqrt(delta)) - k q
double robust_gram_bound(std::size_t n_copies, std::size_t k, double delta, double q);

}  // namespace routed_bell
