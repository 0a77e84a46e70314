#include "routed_bell/inequalities.hpp"

#include <bit>
#include <string>

#include "routed_bell/constants.hpp"
#include "routed_bell/error.hpp"

namespace routed_bell {

namespace {

void require_product_leg(const RoutedCorrelation& corr, std::size_t settings, std::size_t outcomes) {
  const std::size_t expected = std::size_t{1} << corr.n_copies;
  if (corr.x_count != expected || corr.a_count != expected || settings != expected || outcomes != expected) {
    throw PreconditionError("setting-count mismatch: the N-product functional needs 2^N settings and outcomes");
  }
}

double click_rate_sum(const RoutedCorrelation& corr) {
  double total = 0.0;
  for (std::size_t y = 0; y < corr.y1_count; ++y) {
    for (std::size_t b = 0; b < corr.b1_clicks; ++b) total += corr.b1_marginal(y, b);
  }
  return total;
}

}  // namespace

std::string_view to_string(Family family) { return family == Family::bb84 ? "bb84" : "chsh"; }

Family parse_family(std::string_view text) {
  if (text == "bb84") return Family::bb84;
  if (text == "chsh") return Family::chsh;
  throw PreconditionError("unknown functional family '" + std::string(text) + "'");
}

std::string_view to_string(PenaltyWindow window) {
  switch (window) {
    case PenaltyWindow::proven:
      return "proven";
    case PenaltyWindow::search_verified:
      return "search_verified";
    case PenaltyWindow::outside:
      return "outside";
  }
  return "outside";
}

double chsh_n_score(const RoutedCorrelation& corr, Leg leg) {
  const bool far = leg == Leg::b1;
  const std::size_t ny = far ? corr.y1_count : corr.y0_count;
  const std::size_t nb = far ? corr.b1_clicks : corr.b0_count;
  require_product_leg(corr, ny, nb);
  double sum = 0.0;
  for (std::size_t x = 0; x < corr.x_count; ++x) {
    for (std::size_t y = 0; y < ny; ++y) {
      // Win condition bitwise: x_j y_j = a_j xor b_j, so b = a xor (x & y).
      for (std::size_t a = 0; a < corr.a_count; ++a) {
        const std::size_t b = a ^ (x & y);
        sum += far ? corr.p1(x, y, a, b) : corr.p0(x, y, a, b);
      }
    }
  }
  return sum * inv_pow2(2 * corr.n_copies);
}

double bb84_n_score(const RoutedCorrelation& corr) {
  require_product_leg(corr, corr.y1_count, corr.b1_clicks);
  double sum = 0.0;
  for (std::size_t x = 0; x < corr.x_count; ++x) {
    for (std::size_t a = 0; a < corr.a_count; ++a) sum += corr.p1(x, x, a, a);
  }
  return sum * inv_pow2(corr.n_copies);
}

PenaltyWindow penalty_window(Family family, std::size_t n_copies, double q) {
  if (family == Family::bb84) {
    return (q >= inv_sqrt2 && q <= 1.0) ? PenaltyWindow::proven : PenaltyWindow::outside;
  }
  const double top = alpha_pow(n_copies);
  const double scale = alpha_pow(n_copies - 1);
  if (q >= top) return PenaltyWindow::outside;
  // The Gram argument with off-diagonal beta is not sound; beta's window is
  // backed by the exhaustive scan up to N = 3 and by the exact overlap beyond.
  if (q >= scale * chsh_pair_overlap) return PenaltyWindow::proven;
  if (n_copies <= max_searched_copies && q >= scale * beta) return PenaltyWindow::proven;
  if (n_copies <= max_searched_copies && q >= scale * beta_prime) return PenaltyWindow::search_verified;
  return PenaltyWindow::outside;
}

double default_penalty(Family family, std::size_t n_copies) {
  if (family == Family::bb84) return inv_sqrt2;
  return alpha_pow(n_copies - 1) * (n_copies <= max_searched_copies ? beta : chsh_pair_overlap);
}

double jm_threshold(Family family, std::size_t n_copies, double q) {
  const double top = family == Family::bb84 ? 1.0 : alpha_pow(n_copies);
  return (top - q) * inv_pow2(n_copies);
}

double ideal_penalized_value(Family family, std::size_t n_copies, double q, double eta) {
  const double top = family == Family::bb84 ? 1.0 : alpha_pow(n_copies);
  return (top - q) * eta;
}

PenalizedScore penalized_score(const RoutedCorrelation& corr, Family family, double q) {
  if (!(q >= 0.0)) throw PreconditionError("penalty q must be nonnegative");
  PenalizedScore s;
  s.family = family;
  s.n_copies = corr.n_copies;
  s.q = q;
  const double base = family == Family::bb84 ? bb84_n_score(corr) : chsh_n_score(corr, Leg::b1);
  s.value = base - q * inv_pow2(corr.n_copies) * click_rate_sum(corr);
  s.jm_threshold = jm_threshold(family, corr.n_copies, q);
  s.ideal_value = ideal_penalized_value(family, corr.n_copies, q, corr.eta);
  s.window = penalty_window(family, corr.n_copies, q);
  return s;
}

double critical_efficiency_closed_form(Family family, std::size_t n_copies, double q) {
  const double per_click = ideal_penalized_value(family, n_copies, q, 1.0);
  if (!(per_click > 0.0)) throw PreconditionError("zero ideal margin: q must be below the ideal per-click score");
  // (top - q) eta = (top - q) / 2^N
  return jm_threshold(family, n_copies, q) / per_click;
}

}  // namespace routed_bell
