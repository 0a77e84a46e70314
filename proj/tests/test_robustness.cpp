#include <doctest.h>

#include <cmath>

#include "routed_bell/constants.hpp"
#include "routed_bell/error.hpp"
#include "routed_bell/robustness.hpp"

using namespace routed_bell;

namespace {

// Independent re-evaluation of the robust efficiency formulas.
double oracle_eta(std::size_t n, double delta, double eps, bool linear) {
  const double margin = 1.0 - 1.0 / std::sqrt(2.0);
  const double shift = linear ? eps / std::pow((1.0 + 1.0 / std::sqrt(2.0)) / 2.0, static_cast<double>(n)) : 0.0;
  return margin / (margin - shift - std::sqrt(delta)) / std::pow(2.0, static_cast<double>(n));
}

RobustnessInput input(std::size_t n, double eps, double f, bool linear) {
  RobustnessInput in;
  in.n_copies = n;
  in.epsilon = eps;
  in.f_value = f;
  in.linear_translation = linear;
  return in;
}

}  // namespace

TEST_CASE("delta bound examples") {
  CHECK(delta_bound(input(1, 0.0, 0.0, false)) == 0.0);
  const double g = 0.001 * 0.001 + 2 * 0.001;
  CHECK(delta_bound(input(1, 0.1, 0.001, false)) == doctest::Approx(8 * g + 16 * g * g).epsilon(1e-14));
  CHECK(std::abs(delta_bound(input(1, 0.1, 0.001, false)) - 0.016072) < 5e-7);
  CHECK(std::abs(delta_bound(input(2, 0.1, 0.001, false)) - 0.065057) < 5e-7);
  CHECK_THROWS_AS(delta_bound(input(1, 0.1, -0.001, false)), PreconditionError);
  double prev = 0;
  for (int i = 1; i <= 20; ++i) {
    const double d = delta_bound(input(1, 0.1, i * 1e-4, false));
    CHECK(d > prev);
    CHECK(delta_bound(input(2, 0.1, i * 1e-4, false)) > d);
    prev = d;
  }
}

TEST_CASE("robust efficiency examples") {
  for (std::size_t n = 1; n <= 4; ++n) {
    const RobustEta r = robust_eta_star(input(n, 0.0, 0.0, false));
    CHECK(r.eta_star == inv_pow2(n));
    CHECK(r.q == inv_sqrt2);
    CHECK(robust_eta_star(input(n, 0.0, 0.0, true)).eta_star == inv_pow2(n));
  }
  const RobustEta a = robust_eta_star(input(1, 0.0, 0.0, false), 0.01);
  CHECK(std::abs(a.eta_star - 0.75925) < 5e-5);
  CHECK(a.eta_star == doctest::Approx(oracle_eta(1, 0.01, 0.0, false)).epsilon(1e-12));
  CHECK(a.q == doctest::Approx(inv_sqrt2 + 0.1).epsilon(1e-14));
  const RobustEta b = robust_eta_star(input(1, 0.01, 0.0, true), 0.01);
  CHECK(b.eta_star == doctest::Approx(oracle_eta(1, 0.01, 0.01, true)).epsilon(1e-12));
  CHECK(std::abs(b.eta_star - 0.808305) < 5e-6);

  // delta from f when no delta is given
  const RobustnessInput in = input(1, 0.0, 0.001, false);
  CHECK(robust_eta_star(in).delta == delta_bound(in));
  CHECK(in.inconsistent());
  CHECK_FALSE(input(1, 0.1, 0.001, false).inconsistent());
}

TEST_CASE("robust efficiency grows with delta and epsilon") {
  for (std::size_t n = 1; n <= 3; ++n) {
    double prev = inv_pow2(n);
    for (int i = 1; i <= 20; ++i) {
      const double e = robust_eta_star(input(n, 0.0, 0.0, false), i * 0.004).eta_star;
      CHECK(e > prev);
      CHECK(e == doctest::Approx(oracle_eta(n, i * 0.004, 0.0, false)).epsilon(1e-12));
      prev = e;
    }
    prev = inv_pow2(n);
    for (int i = 1; i <= 20; ++i) {
      const double eps = i * 0.004 * alpha_pow(n);
      const double e = robust_eta_star(input(n, eps, 0.0, true), 0.0).eta_star;
      CHECK(e > prev);
      CHECK(e == doctest::Approx(oracle_eta(n, 0.0, eps, true)).epsilon(1e-12));
      prev = e;
    }
  }
}

TEST_CASE("robust window errors") {
  CHECK_THROWS_WITH(robust_eta_star(input(1, 0.0, 0.0, false), 0.09), doctest::Contains("robustness window empty"));
  CHECK_THROWS_WITH(robust_eta_star(input(1, 0.3, 0.0, true), 0.0), doctest::Contains("robustness window empty"));
  CHECK_THROWS_AS(robust_eta_star(input(1, 0.0, 0.0, false), -0.01), PreconditionError);
}

TEST_CASE("robust gram bound") {
  for (std::size_t k = 1; k <= 8; ++k) {
    CHECK(robust_gram_bound(3, k, 0.0, inv_sqrt2) == doctest::Approx(1 - inv_sqrt2).epsilon(1e-14));
    for (double delta : {0.0, 0.001, 0.01, 0.04, 0.08}) {
      const double q = inv_sqrt2 + std::sqrt(delta);
      CHECK(std::abs(robust_gram_bound(3, k, delta, q) - (1 - inv_sqrt2)) < 1e-12);
    }
  }
  CHECK(robust_gram_bound(1, 1, 0.04, 0.8) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(robust_gram_bound(1, 2, 0.04, 0.8) != doctest::Approx(robust_gram_bound(1, 1, 0.04, 0.8)));
  CHECK_THROWS_AS(robust_gram_bound(1, 0, 0.0, 0.7), PreconditionError);
  CHECK_THROWS_AS(robust_gram_bound(1, 1, -1.0, 0.7), PreconditionError);
}
