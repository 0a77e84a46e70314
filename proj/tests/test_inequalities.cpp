#include <doctest.h>

#include <cmath>

#include "routed_bell/constants.hpp"
#include "routed_bell/error.hpp"
#include "routed_bell/inequalities.hpp"

using namespace routed_bell;

namespace {

RoutedCorrelation ideal(StrategyKind k, std::size_t n, double eta, double v = 1.0) {
  return correlation(build_strategy(k, n, eta, v));
}

StrategyKind kind_of(Family f) { return f == Family::bb84 ? StrategyKind::rbb84 : StrategyKind::rchsh; }

}  // namespace

TEST_CASE("N-product CHSH scores") {
  CHECK(chsh_n_score(ideal(StrategyKind::rchsh, 1, 1.0), Leg::b0) == doctest::Approx(alpha).epsilon(1e-12));
  for (std::size_t n = 1; n <= 4; ++n)
    CHECK(std::abs(chsh_n_score(ideal(StrategyKind::rchsh, n, 1.0), Leg::b0) - alpha_pow(n)) < 1e-10);
  // Endpoints alpha^2 and 1/4 mix linearly.
  CHECK(chsh_n_score(ideal(StrategyKind::rchsh, 2, 1.0, 0.5), Leg::b0) ==
        doctest::Approx(0.5 * alpha * alpha + 0.125).epsilon(1e-12));
  CHECK(chsh_n_score(ideal(StrategyKind::rchsh, 2, 1.0, 0.0), Leg::b0) == doctest::Approx(0.25).epsilon(1e-12));
  // No-click outcomes never win on the long path.
  CHECK(chsh_n_score(ideal(StrategyKind::rchsh, 2, 0.4), Leg::b1) ==
        doctest::Approx(0.4 * alpha * alpha).epsilon(1e-12));
  CHECK_THROWS_WITH(chsh_n_score(ideal(StrategyKind::rbb84_chsh, 1, 1.0), Leg::b1),
                    doctest::Contains("setting-count mismatch"));
}

TEST_CASE("N-product BB84 scores") {
  CHECK(bb84_n_score(ideal(StrategyKind::rbb84, 2, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bb84_n_score(ideal(StrategyKind::rbb84, 1, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bb84_n_score(ideal(StrategyKind::rbb84, 3, 0.0)) == 0.0);
  CHECK(bb84_n_score(ideal(StrategyKind::rbb84, 1, 0.7)) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("penalized score examples") {
  const double q = inv_sqrt2;
  const PenalizedScore s = penalized_score(ideal(StrategyKind::rbb84, 1, 1.0), Family::bb84, q);
  CHECK(s.value == doctest::Approx(1 - q).epsilon(1e-12));
  CHECK(s.jm_threshold == doctest::Approx((1 - q) / 2).epsilon(1e-12));
  CHECK(s.window == PenaltyWindow::proven);
  CHECK(s.certified());

  const PenalizedScore c = penalized_score(ideal(StrategyKind::rchsh, 2, 0.5), Family::chsh, alpha);
  CHECK(c.value == doctest::Approx((alpha * alpha - alpha) / 2).epsilon(1e-12));
  CHECK(c.window == PenaltyWindow::outside);
  CHECK_FALSE(c.certified());

  for (std::size_t n = 1; n <= 3; ++n)
    CHECK(penalized_score(ideal(StrategyKind::rbb84, n, 1.0), Family::bb84, 0.0).value ==
          doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(penalized_score(ideal(StrategyKind::rbb84, 1, 1.0), Family::bb84, -0.1), PreconditionError);
  CHECK(parse_family("chsh") == Family::chsh);
  CHECK_THROWS_AS(parse_family("bb85"), PreconditionError);
}

TEST_CASE("penalty windows") {
  CHECK(penalty_window(Family::bb84, 1, inv_sqrt2) == PenaltyWindow::proven);
  CHECK(penalty_window(Family::bb84, 2, 1.0) == PenaltyWindow::proven);
  CHECK(penalty_window(Family::bb84, 2, 0.7) == PenaltyWindow::outside);
  CHECK(penalty_window(Family::chsh, 2, alpha * beta) == PenaltyWindow::proven);
  CHECK(penalty_window(Family::chsh, 2, alpha * beta - 1e-4) == PenaltyWindow::search_verified);
  CHECK(penalty_window(Family::chsh, 2, alpha * beta_prime - 1e-4) == PenaltyWindow::outside);
  CHECK(penalty_window(Family::chsh, 4, alpha_pow(3) * beta_prime + 1e-4) == PenaltyWindow::outside);
  // Beyond the searched range only the exact-overlap Gram bound applies.
  CHECK(penalty_window(Family::chsh, 4, alpha_pow(3) * beta) == PenaltyWindow::outside);
  CHECK(penalty_window(Family::chsh, 4, alpha_pow(3) * chsh_pair_overlap) == PenaltyWindow::proven);
  CHECK(penalty_window(Family::chsh, 2, alpha * alpha) == PenaltyWindow::outside);
  CHECK(default_penalty(Family::chsh, 4) == doctest::Approx(alpha_pow(3) * chsh_pair_overlap));
  CHECK(default_penalty(Family::bb84, 3) == inv_sqrt2);
  CHECK(default_penalty(Family::chsh, 3) == doctest::Approx(alpha * alpha * beta));
}

TEST_CASE("ideal penalized scores reproduce the closed forms") {
  const double etas[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  const double qs[] = {inv_sqrt2, 0.8, 0.9};
  for (Family f : {Family::bb84, Family::chsh})
    for (std::size_t n = 1; n <= 2; ++n)
      for (double eta : etas)
        for (double q : qs) {
          const PenalizedScore s = penalized_score(ideal(kind_of(f), n, eta), f, q);
          const double top = f == Family::bb84 ? 1.0 : alpha_pow(n);
          CHECK(std::abs(s.value - (top - q) * eta) < 1e-12);
          CHECK(std::abs(s.ideal_value - (top - q) * eta) < 1e-12);
          CHECK(std::abs(s.jm_threshold - (top - q) * inv_pow2(n)) < 1e-15);
          CHECK(ideal_penalized_value(f, n, q, eta) == s.ideal_value);
          CHECK(jm_threshold(f, n, q) == s.jm_threshold);
        }
}

TEST_CASE("critical efficiency is 1/2^N") {
  CHECK(critical_efficiency_closed_form(Family::bb84, 1, 0.71) == 0.5);
  CHECK(critical_efficiency_closed_form(Family::chsh, 3, 0.7 * alpha * alpha) == 0.125);
  for (std::size_t n = 1; n <= 3; ++n)
    for (Family f : {Family::bb84, Family::chsh})
      CHECK(critical_efficiency_closed_form(f, n, default_penalty(f, n)) == inv_pow2(n));
  CHECK_THROWS_WITH(critical_efficiency_closed_form(Family::bb84, 1, 1.0), doctest::Contains("zero ideal margin"));
  CHECK_THROWS_WITH(critical_efficiency_closed_form(Family::chsh, 2, alpha * alpha),
                    doctest::Contains("zero ideal margin"));
}

TEST_CASE("score exceeds the threshold exactly above the critical efficiency") {
  for (Family f : {Family::bb84, Family::chsh})
    for (std::size_t n = 1; n <= 3; ++n) {
      const double q = default_penalty(f, n);
      double prev = -1.0;
      for (int i = 0; i <= 10; ++i) {
        const double eta = i / 10.0;
        const PenalizedScore s = penalized_score(ideal(kind_of(f), n, eta), f, q);
        CHECK((s.value > s.jm_threshold + 1e-9) == (eta > inv_pow2(n) + 1e-9));
        CHECK(s.value >= prev - 1e-15);
        prev = s.value;
      }
      // Affine in eta: midpoint rule.
      const double lo = penalized_score(ideal(kind_of(f), n, 0.2), f, q).value;
      const double hi = penalized_score(ideal(kind_of(f), n, 0.6), f, q).value;
      const double mid = penalized_score(ideal(kind_of(f), n, 0.4), f, q).value;
      CHECK(std::abs(mid - 0.5 * (lo + hi)) < 1e-12);
    }
}
