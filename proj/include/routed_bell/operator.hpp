#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace routed_bell {

using complex = std::complex<double>;

/// Dense complex square matrix, row-major. Immutable once built; the
/// Hermitian flag is computed at construction (tolerance 1e-12).
class Operator {
 public:
  Operator() = default;
  Operator(std::size_t dim, std::vector<complex> entries);

  static Operator zero(std::size_t dim);
  static Operator identity(std::size_t dim);
  static Operator diagonal(std::span<const double> values);
  static Operator from_real(std::size_t dim, std::initializer_list<double> row_major);

  std::size_t dim() const { return dim_; }
  bool hermitian() const { return hermitian_; }
  const complex& operator()(std::size_t row, std::size_t col) const { return entries_[row * dim_ + col]; }
  std::span<const complex> entries() const { return entries_; }

  /// True when every imaginary part is below tol.
  bool is_real(double tol = 1e-12) const;

  complex trace() const;
  Operator adjoint() const;
  Operator transpose() const;

  Operator operator+(const Operator& rhs) const;
  Operator operator-(const Operator& rhs) const;
  Operator operator*(const Operator& rhs) const;
  Operator operator*(complex scale) const;
  Operator operator*(double scale) const;

  /// Largest absolute entry-wise difference; dims must agree.
  double max_abs_diff(const Operator& rhs) const;

 private:
  std::size_t dim_ = 0;
  std::vector<complex> entries_;
  bool hermitian_ = false;
};

inline Operator operator*(double s, const Operator& op) { return op * s; }

/// Unit vector in C^dim.
class PureState {
 public:
  PureState(std::vector<complex> amplitudes);

  /// |i> in dimension dim.
  static PureState basis(std::size_t dim, std::size_t index);
  /// |phi+> = (|00> + |11>)/sqrt2 tensored n times, laid out as (A-copies)(B-copies).
  static PureState max_entangled(std::size_t n_copies);

  std::size_t dim() const { return amplitudes_.size(); }
  std::span<const complex> amplitudes() const { return amplitudes_; }
  Operator projector() const;

 private:
  std::vector<complex> amplitudes_;
};

/// |a><b| for arbitrary (unnormalized) vectors of equal length.
Operator outer(std::span<const complex> a, std::span<const complex> b);

enum class Pauli { I, X, Z };

Operator pauli(Pauli kind);

/// Kronecker product in list order; first factor is the most significant index.
Operator tensor(std::span<const Operator> ops);
Operator tensor(std::initializer_list<Operator> ops);

/// Largest singular value.
double operator_norm(const Operator& op);

/// Algebraically largest / smallest eigenvalue of a Hermitian operator.
double max_eigenvalue(const Operator& op);
double min_eigenvalue(const Operator& op);

/// All eigenvalues of a Hermitian operator, ascending.
std::vector<double> eigenvalues(const Operator& op);

/// f(op) through the spectral decomposition of a Hermitian operator.
Operator apply_spectral(const Operator& op, const std::function<double(double)>& f);

/// Principal square root of a PSD operator; eigenvalues below zero are clamped.
Operator sqrt_psd(const Operator& op);

/// Trace over every factor not listed in keep. `dims` lists the factor
/// dimensions in tensor order; kept factors stay in their original order.
Operator partial_trace(const Operator& op, std::span<const std::size_t> dims,
                       std::span<const std::size_t> keep);

inline constexpr double psd_tolerance = 1e-10;

bool is_psd(const Operator& op, double tol = psd_tolerance);

struct GramBound {
  Operator gram;  ///< k x k matrix of || sqrt(S_l) sqrt(S_l') ||
  double bound;   ///< || gram ||, an upper bound on || sum_l S_l ||
};

/// Norm bound for a sum of PSD operators through the Gram matrix of their
/// square roots (Popovici-Sebestyen).
GramBound gram_norm_bound(std::span<const Operator> psd_ops);

/// Checks || a || <= || b || + 1e-10 for entry-wise nonnegative real matrices
/// with a <= b entry by entry. Throws when those hypotheses fail.
bool elementwise_dominance_norm_check(const Operator& a, const Operator& b);

}  // namespace routed_bell
