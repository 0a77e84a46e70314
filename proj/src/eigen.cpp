#include "routed_bell/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "routed_bell/error.hpp"

namespace routed_bell::linalg {

namespace {

// Reduces the symmetric matrix held in v (row-major, n x n) to tridiagonal
// form. On return d holds the diagonal and e the subdiagonal in e[1..n-1].
// With accumulate set, v is overwritten by the orthogonal transformation.
void householder_tridiagonalize(double* v, std::size_t n, double* d, double* e, bool accumulate) {
  auto V = [v, n](std::size_t r, std::size_t c) -> double& { return v[r * n + c]; };
  for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        for (std::size_t k = j + 1; k < i; ++k) {
          g += V(k, j) * d[k];
          e[k] += V(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k < i; ++k) V(k, j) -= (f * e[k] + g * d[k]);
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  if (!accumulate) {
    for (std::size_t j = 0; j < n; ++j) d[j] = V(j, j);
    e[0] = 0.0;
    return;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = V(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += V(k, i + 1) * V(k, j);
        for (std::size_t k = 0; k <= i; ++k) V(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e). Rotations are applied to v when it is
// non-null. Plain sqrt instead of hypot: inputs are O(1) operator entries and
// hypot dominates the runtime of the pattern scans.
void tridiagonal_ql(double* d, double* e, std::size_t n, double* v) {
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n - 1 && std::abs(e[m]) > eps * tst1) ++m;

    if (m > l) {
      int iterations = 0;
      do {
        if (++iterations > 60) throw ComputationError("symmetric eigensolver did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::sqrt(p * p + 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::sqrt(p * p + e[ii] * e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          if (v != nullptr) {
            for (std::size_t k = 0; k < n; ++k) {
              double& vk1 = v[k * n + ii + 1];
              double& vk0 = v[k * n + ii];
              h = vk1;
              vk1 = s * vk0 + c * h;
              vk0 = c * vk0 - s * h;
            }
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

void check_finite(std::span<const double> a) {
  for (double x : a) {
    if (!std::isfinite(x)) throw PreconditionError("non-finite matrix entry");
  }
}

}  // namespace

SymmetricEigen symmetric_eigen(std::span<const double> a, std::size_t n, bool want_vectors) {
  if (a.size() != n * n) throw PreconditionError("matrix storage does not match dimension");
  check_finite(a);
  SymmetricEigen out;
  if (n == 0) return out;
  std::vector<double> v(a.begin(), a.end());
  std::vector<double> d(n), e(n);
  householder_tridiagonalize(v.data(), n, d.data(), e.data(), want_vectors);
  tridiagonal_ql(d.data(), e.data(), n, want_vectors ? v.data() : nullptr);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });
  out.values.resize(n);
  for (std::size_t j = 0; j < n; ++j) out.values[j] = d[order[j]];
  if (want_vectors) {
    out.vectors.resize(n * n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < n; ++j) out.vectors[r * n + j] = v[r * n + order[j]];
    }
  }
  return out;
}

double symmetric_max_eigenvalue(std::span<const double> a, std::size_t n,
                                std::vector<double>& work) {
  if (n == 0) return 0.0;
  if (n == 1) return a[0];
  work.resize(n * n + 2 * n);
  double* v = work.data();
  double* d = v + n * n;
  double* e = d + n;
  std::copy(a.begin(), a.end(), v);
  householder_tridiagonalize(v, n, d, e, false);
  tridiagonal_ql(d, e, n, nullptr);
  return *std::max_element(d, d + n);
}

}  // namespace routed_bell::linalg
