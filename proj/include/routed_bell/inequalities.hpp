#pragma once

#include <cstddef>
#include <string_view>

#include "routed_bell/strategies.hpp"

namespace routed_bell {

enum class Family { bb84, chsh };

std::string_view to_string(Family family);
Family parse_family(std::string_view text);

enum class Leg { b0, b1 };

/// N-product CHSH winning probability between A and the chosen Bob leg.
/// No-click outcomes never win.
double chsh_n_score(const RoutedCorrelation& corr, Leg leg);

/// N-product BB84 score between A and the far device.
double bb84_n_score(const RoutedCorrelation& corr);

/// Where q sits relative to the penalty windows on which the JM thresholds
/// hold.
enum class PenaltyWindow {
  proven,           ///< BB84: [1/sqrt2, 1]; CHSH: [alpha^{N-1} beta, alpha^N) for N <= 3, else from alpha^{N-1} (1+sqrt3)/4
  search_verified,  ///< CHSH only: q >= alpha^{N-1} beta' with N <= 3
  outside,
};

/// Largest N whose CHSH pattern space has been searched exhaustively.
inline constexpr std::size_t max_searched_copies = 3;

std::string_view to_string(PenaltyWindow window);

PenaltyWindow penalty_window(Family family, std::size_t n_copies, double q);

/// Lower end of the proven window: 1/sqrt2 (BB84), alpha^{N-1} beta (CHSH,
/// N <= 3) or alpha^{N-1} (1+sqrt3)/4 (CHSH, N = 4).
double default_penalty(Family family, std::size_t n_copies);

struct PenalizedScore {
  Family family = Family::bb84;
  std::size_t n_copies = 1;
  double q = 0.0;
  double value = 0.0;
  double jm_threshold = 0.0;  ///< (1-q)/2^N or (alpha^N-q)/2^N
  double ideal_value = 0.0;   ///< (1-q) eta or (alpha^N-q) eta
  PenaltyWindow window = PenaltyWindow::outside;

  /// Only proven-window penalties certify; an out-of-window threshold is unproven.
  bool certified(double tol = 1e-9) const {
    return window == PenaltyWindow::proven && value > jm_threshold + tol;
  }
};

/// Closed-form JM threshold of the penalized functional.
double jm_threshold(Family family, std::size_t n_copies, double q);

/// Penalized score of an ideal strategy with click probability eta.
double ideal_penalized_value(Family family, std::size_t n_copies, double q, double eta);

/// Penalized functional: base score minus (q/2^N) times the total click rate.
PenalizedScore penalized_score(const RoutedCorrelation& corr, Family family, double q);

/// Efficiency at which the ideal score meets the JM threshold; 1/2^N.
double critical_efficiency_closed_form(Family family, std::size_t n_copies, double q);

}  // namespace routed_bell
