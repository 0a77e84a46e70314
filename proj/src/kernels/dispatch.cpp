#include <atomic>
#include <stdexcept>

#include "routed_bell/kernels.hpp"

namespace routed_bell::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() { return cpu_has_avx2() ? Isa::avx2 : Isa::scalar; }

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("kernel operand length mismatch");
}

}  // namespace

Isa active_isa() { return current().load(std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool force_isa(Isa isa) {
  if (isa == Isa::avx2 && !cpu_has_avx2()) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

double dot(std::span<const double> x, std::span<const double> y) {
  check_sizes(x.size(), y.size());
#if defined(__x86_64__)
  if (active_isa() == Isa::avx2) return avx2::dot(x.data(), y.data(), x.size());
#endif
  return scalar::dot(x.data(), y.data(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_sizes(x.size(), y.size());
#if defined(__x86_64__)
  if (active_isa() == Isa::avx2) return avx2::axpy(alpha, x.data(), y.data(), x.size());
#endif
  scalar::axpy(alpha, x.data(), y.data(), x.size());
}

void caxpy(std::complex<double> alpha, std::span<const std::complex<double>> x,
           std::span<std::complex<double>> y) {
  check_sizes(x.size(), y.size());
#if defined(__x86_64__)
  if (active_isa() == Isa::avx2) return avx2::caxpy(alpha, x.data(), y.data(), x.size());
#endif
  scalar::caxpy(alpha, x.data(), y.data(), x.size());
}

double real_inner(std::span<const std::complex<double>> x,
                  std::span<const std::complex<double>> y) {
  check_sizes(x.size(), y.size());
  // Re(conj(a) b) = ar br + ai bi: a plain dot over the interleaved storage.
  const auto* xd = reinterpret_cast<const double*>(x.data());
  const auto* yd = reinterpret_cast<const double*>(y.data());
  return dot(std::span<const double>(xd, 2 * x.size()), std::span<const double>(yd, 2 * y.size()));
}

}  // namespace routed_bell::kernels
