#include <doctest.h>

#include <complex>
#include <random>
#include <vector>

#include "routed_bell/kernels.hpp"

namespace k = routed_bell::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

std::vector<std::complex<double>> random_cvec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::complex<double>> v(n);
  for (auto& x : v) x = {u(rng), u(rng)};
  return v;
}

bool avx2_available() {
  const k::Isa before = k::active_isa();
  const bool ok = k::force_isa(k::Isa::avx2);
  k::force_isa(before);
  return ok;
}

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
  std::mt19937_64 rng(7);
  for (std::size_t n : {0u, 1u, 3u, 8u, 17u}) {
    const auto x = random_vec(rng, n), y = random_vec(rng, n);
    double ref = 0;
    for (std::size_t i = 0; i < n; ++i) ref += x[i] * y[i];
    CHECK(k::scalar::dot(x.data(), y.data(), n) == doctest::Approx(ref).epsilon(1e-14));

    auto z = y;
    k::scalar::axpy(0.5, x.data(), z.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(z[i] == doctest::Approx(y[i] + 0.5 * x[i]));
  }
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!avx2_available()) {
    MESSAGE("AVX2/FMA not available; equivalence not exercised");
    return;
  }
#if defined(__x86_64__)
  std::mt19937_64 rng(11);
  for (std::size_t n = 0; n < 70; ++n) {
    const auto x = random_vec(rng, n), y = random_vec(rng, n);
    const double s = k::scalar::dot(x.data(), y.data(), n);
    const double v = k::avx2::dot(x.data(), y.data(), n);
    CHECK(std::abs(s - v) <= 1e-13 * (1.0 + static_cast<double>(n)));

    auto ys = y, yv = y;
    k::scalar::axpy(-1.25, x.data(), ys.data(), n);
    k::avx2::axpy(-1.25, x.data(), yv.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ys[i] - yv[i]) <= 1e-15);

    const auto cx = random_cvec(rng, n), cy = random_cvec(rng, n);
    auto cs = cy, cv = cy;
    const std::complex<double> alpha(0.3, -0.7);
    k::scalar::caxpy(alpha, cx.data(), cs.data(), n);
    k::avx2::caxpy(alpha, cx.data(), cv.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(cs[i] - cv[i]) <= 1e-15);
  }
#endif
}

TEST_CASE("dispatching entry points give identical results under both ISAs") {
  std::mt19937_64 rng(3);
  const auto x = random_cvec(rng, 33), y = random_cvec(rng, 33);
  const k::Isa before = k::active_isa();
  REQUIRE(k::force_isa(k::Isa::scalar));
  const double s = k::real_inner(x, y);
  double ref = 0;
  for (std::size_t i = 0; i < x.size(); ++i) ref += (std::conj(x[i]) * y[i]).real();
  CHECK(s == doctest::Approx(ref).epsilon(1e-14));
  if (k::force_isa(k::Isa::avx2)) CHECK(std::abs(k::real_inner(x, y) - s) <= 1e-13);
  k::force_isa(before);
}

TEST_CASE("size mismatches are rejected") {
  std::vector<double> a(3), b(4);
  CHECK_THROWS_AS(k::dot(a, b), std::invalid_argument);
  CHECK_THROWS_AS(k::axpy(1.0, a, b), std::invalid_argument);
}

TEST_CASE("isa names") {
  CHECK(k::isa_name(k::Isa::scalar) == "scalar");
  CHECK(k::isa_name(k::Isa::avx2) == "avx2");
}
