#pragma once

#include <cmath>
#include <cstddef>

namespace routed_bell {

inline const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

/// CHSH winning probability of the optimal qubit strategy, (1 + 1/sqrt2) / 2.
inline const double alpha = 0.5 * (1.0 + inv_sqrt2);

/// Proven off-diagonal Gram bound for the CHSH-family C-operators.
inline const double beta = (2.0 + std::sqrt(2.0) + std::sqrt(4.0 * std::sqrt(2.0) - 2.0)) / 8.0;

/// Largest || sqrt(pi) sqrt(pi') || over distinct single-copy CHSH-family
/// factors, (1 + sqrt3) / 4. Exceeds beta, so beta alone does not bound the
/// off-diagonal Gram entries.
inline const double chsh_pair_overlap = (1.0 + std::sqrt(3.0)) / 4.0;

/// Penalty threshold found by exhaustive search over CHSH-family patterns.
inline const double beta_prime = (4.0 - std::sqrt(2.0)) / 4.0;

inline double alpha_pow(std::size_t n) { return std::pow(alpha, static_cast<double>(n)); }

/// 2^-n, exact in binary floating point.
inline double inv_pow2(std::size_t n) { return std::ldexp(1.0, -static_cast<int>(n)); }

}  // namespace routed_bell
