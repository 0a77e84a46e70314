#include "routed_bell/operator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "routed_bell/eigen.hpp"
#include "routed_bell/error.hpp"
#include "routed_bell/kernels.hpp"

namespace routed_bell {

namespace {

constexpr double hermitian_tolerance = 1e-12;

bool check_hermitian(std::size_t dim, std::span<const complex> e) {
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      if (std::abs(e[i * dim + j] - std::conj(e[j * dim + i])) > hermitian_tolerance) return false;
    }
  }
  return true;
}

void require_same_dim(const Operator& a, const Operator& b) {
  if (a.dim() != b.dim()) throw PreconditionError("operator dimension mismatch");
}

void require_finite(const Operator& op) {
  for (const complex& z : op.entries()) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw PreconditionError("non-finite operator entry");
    }
  }
}

// Spectral data of the Hermitian part (op + op^dagger) / 2. Complex input goes
// through the real 2n x 2n embedding [[Re, -Im], [Im, Re]], whose spectrum is
// that of op with every eigenvalue doubled.
struct HermitianSpectrum {
  bool embedded = false;
  std::size_t n = 0;
  linalg::SymmetricEigen eig;
};

HermitianSpectrum hermitian_spectrum(const Operator& op, bool want_vectors) {
  require_finite(op);
  const std::size_t n = op.dim();
  HermitianSpectrum out;
  out.n = n;
  out.embedded = !op.is_real();
  if (!out.embedded) {
    std::vector<double> a(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a[i * n + j] = 0.5 * (op(i, j).real() + op(j, i).real());
    }
    out.eig = linalg::symmetric_eigen(a, n, want_vectors);
    return out;
  }
  const std::size_t m = 2 * n;
  std::vector<double> a(m * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const complex h = 0.5 * (op(i, j) + std::conj(op(j, i)));
      a[i * m + j] = h.real();
      a[i * m + n + j] = -h.imag();
      a[(n + i) * m + j] = h.imag();
      a[(n + i) * m + n + j] = h.real();
    }
  }
  out.eig = linalg::symmetric_eigen(a, m, want_vectors);
  return out;
}

std::vector<double> spectrum_values(const HermitianSpectrum& s) {
  if (!s.embedded) return s.eig.values;
  std::vector<double> v(s.n);
  for (std::size_t j = 0; j < s.n; ++j) v[j] = 0.5 * (s.eig.values[2 * j] + s.eig.values[2 * j + 1]);
  return v;
}

void require_hermitian(const Operator& op) {
  if (!op.hermitian()) throw PreconditionError("requires Hermitian operator");
}

}  // namespace

Operator::Operator(std::size_t dim, std::vector<complex> entries)
    : dim_(dim), entries_(std::move(entries)) {
  if (dim_ == 0) throw PreconditionError("operator dimension must be positive");
  if (entries_.size() != dim_ * dim_) throw PreconditionError("operator entries must form a dim x dim matrix");
  hermitian_ = check_hermitian(dim_, entries_);
}

Operator Operator::zero(std::size_t dim) { return Operator(dim, std::vector<complex>(dim * dim)); }

Operator Operator::identity(std::size_t dim) {
  std::vector<complex> e(dim * dim);
  for (std::size_t i = 0; i < dim; ++i) e[i * dim + i] = 1.0;
  return Operator(dim, std::move(e));
}

Operator Operator::diagonal(std::span<const double> values) {
  const std::size_t dim = values.size();
  std::vector<complex> e(dim * dim);
  for (std::size_t i = 0; i < dim; ++i) e[i * dim + i] = values[i];
  return Operator(dim, std::move(e));
}

Operator Operator::from_real(std::size_t dim, std::initializer_list<double> row_major) {
  return Operator(dim, std::vector<complex>(row_major.begin(), row_major.end()));
}

bool Operator::is_real(double tol) const {
  return std::all_of(entries_.begin(), entries_.end(),
                     [tol](const complex& z) { return std::abs(z.imag()) <= tol; });
}

complex Operator::trace() const {
  complex t = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) t += entries_[i * dim_ + i];
  return t;
}

Operator Operator::adjoint() const {
  std::vector<complex> e(entries_.size());
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) e[j * dim_ + i] = std::conj(entries_[i * dim_ + j]);
  }
  return Operator(dim_, std::move(e));
}

Operator Operator::transpose() const {
  std::vector<complex> e(entries_.size());
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) e[j * dim_ + i] = entries_[i * dim_ + j];
  }
  return Operator(dim_, std::move(e));
}

Operator Operator::operator+(const Operator& rhs) const {
  require_same_dim(*this, rhs);
  std::vector<complex> e = entries_;
  kernels::caxpy(1.0, rhs.entries_, e);
  return Operator(dim_, std::move(e));
}

Operator Operator::operator-(const Operator& rhs) const {
  require_same_dim(*this, rhs);
  std::vector<complex> e = entries_;
  kernels::caxpy(-1.0, rhs.entries_, e);
  return Operator(dim_, std::move(e));
}

Operator Operator::operator*(const Operator& rhs) const {
  require_same_dim(*this, rhs);
  const std::size_t n = dim_;
  std::vector<complex> e(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<complex> out_row(e.data() + i * n, n);
    for (std::size_t k = 0; k < n; ++k) {
      const complex a = entries_[i * n + k];
      if (a == complex(0.0)) continue;
      kernels::caxpy(a, std::span<const complex>(rhs.entries_.data() + k * n, n), out_row);
    }
  }
  return Operator(n, std::move(e));
}

Operator Operator::operator*(complex scale) const {
  std::vector<complex> e = entries_;
  for (complex& z : e) z *= scale;
  return Operator(dim_, std::move(e));
}

Operator Operator::operator*(double scale) const { return *this * complex(scale, 0.0); }

double Operator::max_abs_diff(const Operator& rhs) const {
  require_same_dim(*this, rhs);
  double m = 0.0;
  for (std::size_t i = 0; i < entries_.size(); ++i) m = std::max(m, std::abs(entries_[i] - rhs.entries_[i]));
  return m;
}

PureState::PureState(std::vector<complex> amplitudes) : amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.empty()) throw PreconditionError("state dimension must be positive");
  double norm2 = 0.0;
  for (const complex& z : amplitudes_) norm2 += std::norm(z);
  if (std::abs(norm2 - 1.0) > 1e-12) throw PreconditionError("state amplitudes must be normalized");
}

PureState PureState::basis(std::size_t dim, std::size_t index) {
  if (index >= dim) throw PreconditionError("basis index out of range");
  std::vector<complex> a(dim);
  a[index] = 1.0;
  return PureState(std::move(a));
}

PureState PureState::max_entangled(std::size_t n_copies) {
  // Amplitude of |a>|b> is 2^{-n/2} when the A and B registers agree.
  const std::size_t d = std::size_t{1} << n_copies;
  std::vector<complex> a(d * d);
  const double amp = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i) a[i * d + i] = amp;
  return PureState(std::move(a));
}

Operator PureState::projector() const { return outer(amplitudes_, amplitudes_); }

Operator outer(std::span<const complex> a, std::span<const complex> b) {
  if (a.size() != b.size() || a.empty()) throw PreconditionError("outer product needs equal nonzero lengths");
  const std::size_t n = a.size();
  std::vector<complex> e(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) e[i * n + j] = a[i] * std::conj(b[j]);
  }
  return Operator(n, std::move(e));
}

Operator pauli(Pauli kind) {
  switch (kind) {
    case Pauli::I:
      return Operator::from_real(2, {1, 0, 0, 1});
    case Pauli::X:
      return Operator::from_real(2, {0, 1, 1, 0});
    case Pauli::Z:
      return Operator::from_real(2, {1, 0, 0, -1});
  }
  throw PreconditionError("unknown Pauli kind");
}

Operator tensor(std::span<const Operator> ops) {
  if (ops.empty()) throw PreconditionError("empty tensor product");
  std::size_t dim = ops[0].dim();
  std::vector<complex> acc(ops[0].entries().begin(), ops[0].entries().end());
  for (std::size_t f = 1; f < ops.size(); ++f) {
    const Operator& b = ops[f];
    const std::size_t db = b.dim();
    const std::size_t nd = dim * db;
    std::vector<complex> next(nd * nd);
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        const complex a = acc[i * dim + j];
        if (a == complex(0.0)) continue;
        for (std::size_t k = 0; k < db; ++k) {
          complex* row = next.data() + (i * db + k) * nd + j * db;
          for (std::size_t l = 0; l < db; ++l) row[l] = a * b(k, l);
        }
      }
    }
    acc = std::move(next);
    dim = nd;
  }
  return Operator(dim, std::move(acc));
}

Operator tensor(std::initializer_list<Operator> ops) {
  return tensor(std::span<const Operator>(ops.begin(), ops.size()));
}

std::vector<double> eigenvalues(const Operator& op) {
  require_hermitian(op);
  return spectrum_values(hermitian_spectrum(op, false));
}

double max_eigenvalue(const Operator& op) { return eigenvalues(op).back(); }

double min_eigenvalue(const Operator& op) { return eigenvalues(op).front(); }

double operator_norm(const Operator& op) {
  require_finite(op);
  if (op.hermitian()) {
    const std::vector<double> v = spectrum_values(hermitian_spectrum(op, false));
    return std::max(std::abs(v.front()), std::abs(v.back()));
  }
  const std::vector<double> v = spectrum_values(hermitian_spectrum(op.adjoint() * op, false));
  return std::sqrt(std::max(0.0, v.back()));
}

Operator apply_spectral(const Operator& op, const std::function<double(double)>& f) {
  require_hermitian(op);
  const HermitianSpectrum s = hermitian_spectrum(op, true);
  const std::size_t m = s.embedded ? 2 * s.n : s.n;
  const std::vector<double>& q = s.eig.vectors;
  std::vector<double> fv(m);
  for (std::size_t j = 0; j < m; ++j) fv[j] = f(s.eig.values[j]);

  // F = Q diag(f) Q^T, only the rows needed to read back f(op).
  const std::size_t n = s.n;
  std::vector<complex> e(n * n);
  std::vector<double> scaled(m);
  const std::size_t rows = s.embedded ? m : n;
  std::vector<double> frow(m);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < m; ++j) scaled[j] = q[r * m + j] * fv[j];
    for (std::size_t c = 0; c < n; ++c) {
      frow[c] = kernels::dot(scaled, std::span<const double>(q.data() + c * m, m));
    }
    // Q is stored with eigenvectors as columns, so row c of Q is q[c*m ...].
    for (std::size_t c = 0; c < n; ++c) {
      if (r < n) {
        e[r * n + c] += frow[c];
      } else {
        e[(r - n) * n + c] += complex(0.0, frow[c]);
      }
    }
  }
  return Operator(n, std::move(e));
}

Operator sqrt_psd(const Operator& op) {
  return apply_spectral(op, [](double x) { return std::sqrt(std::max(0.0, x)); });
}

Operator partial_trace(const Operator& op, std::span<const std::size_t> dims,
                       std::span<const std::size_t> keep) {
  if (dims.empty()) throw PreconditionError("partial trace needs at least one factor");
  const std::size_t total = std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  if (total != op.dim()) throw PreconditionError("partial trace: factor dimensions do not multiply to operator dimension");
  std::vector<bool> kept(dims.size(), false);
  for (std::size_t k : keep) {
    if (k >= dims.size()) throw PreconditionError("partial trace: keep index out of range");
    if (kept[k]) throw PreconditionError("partial trace: duplicate keep index");
    kept[k] = true;
  }

  std::vector<std::size_t> stride(dims.size());
  std::size_t s = 1;
  for (std::size_t k = dims.size(); k-- > 0;) {
    stride[k] = s;
    s *= dims[k];
  }

  // Offsets of every kept (resp. traced) multi-index in the full index space.
  auto offsets = [&](bool want_kept) {
    std::vector<std::size_t> out{0};
    for (std::size_t k = 0; k < dims.size(); ++k) {
      if (kept[k] != want_kept) continue;
      std::vector<std::size_t> next;
      next.reserve(out.size() * dims[k]);
      for (std::size_t base : out) {
        for (std::size_t d = 0; d < dims[k]; ++d) next.push_back(base + d * stride[k]);
      }
      out = std::move(next);
    }
    return out;
  };
  const std::vector<std::size_t> keep_off = offsets(true);
  const std::vector<std::size_t> trace_off = offsets(false);

  const std::size_t n = keep_off.size();
  const std::size_t full = op.dim();
  std::vector<complex> e(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      complex acc = 0.0;
      for (std::size_t t : trace_off) acc += op.entries()[(keep_off[r] + t) * full + keep_off[c] + t];
      e[r * n + c] = acc;
    }
  }
  return Operator(n, std::move(e));
}

bool is_psd(const Operator& op, double tol) {
  return op.hermitian() && min_eigenvalue(op) >= -tol;
}

GramBound gram_norm_bound(std::span<const Operator> psd_ops) {
  if (psd_ops.empty()) throw PreconditionError("gram_norm_bound needs at least one operator");
  std::vector<Operator> roots;
  roots.reserve(psd_ops.size());
  for (const Operator& s : psd_ops) {
    if (s.dim() != psd_ops[0].dim()) throw PreconditionError("operator dimension mismatch");
    if (!is_psd(s)) throw PreconditionError("Popovici-Sebestyen requires PSD operators");
    roots.push_back(sqrt_psd(s));
  }
  const std::size_t k = roots.size();
  std::vector<complex> g(k * k);
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t m = l; m < k; ++m) {
      const double v = operator_norm(roots[l] * roots[m]);
      g[l * k + m] = v;
      g[m * k + l] = v;
    }
  }
  Operator gram(k, std::move(g));
  const double bound = operator_norm(gram);
  return {std::move(gram), bound};
}

bool elementwise_dominance_norm_check(const Operator& a, const Operator& b) {
  require_same_dim(a, b);
  for (std::size_t i = 0; i < a.entries().size(); ++i) {
    const complex x = a.entries()[i];
    const complex y = b.entries()[i];
    if (std::abs(x.imag()) > 1e-12 || std::abs(y.imag()) > 1e-12 || x.real() < 0.0 ||
        y.real() < 0.0 || x.real() > y.real()) {
      throw PreconditionError("lemma preconditions violated");
    }
  }
  return operator_norm(a) <= operator_norm(b) + 1e-10;
}

}  // namespace routed_bell
