#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace routed_bell::linalg {

/// Eigen-decomposition of a real symmetric matrix.
struct SymmetricEigen {
  std::vector<double> values;   ///< ascending
  std::vector<double> vectors;  ///< column j (row-major n x n) is the eigenvector of values[j]; empty if not requested
};

/// Householder tridiagonalization followed by implicit-shift QL iterations.
/// `a` is a row-major n x n symmetric matrix; only its values are read.
SymmetricEigen symmetric_eigen(std::span<const double> a, std::size_t n, bool want_vectors);

/// Largest eigenvalue only. `work` is resized as needed and can be reused
/// across calls to avoid allocation in hot loops.
double symmetric_max_eigenvalue(std::span<const double> a, std::size_t n,
                                std::vector<double>& work);

}  // namespace routed_bell::linalg
