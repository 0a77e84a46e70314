#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

// Inner-loop arithmetic shared by the Born-rule evaluation, partial traces and
// the C-operator accumulation of the exhaustive scan. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2/FMA variant picked once at
// runtime.
namespace routed_bell::kernels {

enum class Isa { scalar, avx2 };

/// Sum of x[i] * y[i].
double dot(std::span<const double> x, std::span<const double> y);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// y += alpha * x over complex arrays.
void caxpy(std::complex<double> alpha, std::span<const std::complex<double>> x,
           std::span<std::complex<double>> y);

/// Re sum conj(x[i]) * y[i]; equals tr(X^dagger Y) for row-major matrices.
double real_inner(std::span<const std::complex<double>> x,
                  std::span<const std::complex<double>> y);

/// Kernel family currently in use.
Isa active_isa();
std::string_view isa_name(Isa isa);

/// Forces a kernel family (tests and benchmarks). Returns false if the CPU
/// cannot run it, in which case nothing changes.
bool force_isa(Isa isa);

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void caxpy(std::complex<double> alpha, const std::complex<double>* x,
           std::complex<double>* y, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__)
namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void caxpy(std::complex<double> alpha, const std::complex<double>* x,
           std::complex<double>* y, std::size_t n);
}  // namespace avx2
#endif

}  // namespace routed_bell::kernels
