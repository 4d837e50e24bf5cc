// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "compsgd/rng.hpp"
#include "compsgd/vec.hpp"

namespace compsgd {

/// Row-major dense matrix. Small-dimension workloads only (the problems here
/// live in d <= a few hundred), so no blocking or BLAS.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Matrix matrix_sum(const Matrix& a, const Matrix& b);
Matrix matrix_scaled(const Matrix& a, double alpha);
DenseVector matvec(const Matrix& a, const DenseVector& x);
/// x^T A x
double quadratic_form(const Matrix& a, const DenseVector& x);
bool is_symmetric(const Matrix& a, double tol);

/// Eigenvalues of a symmetric matrix, sorted ascending. Cyclic Jacobi; plenty
/// for the sizes used here and has no external dependencies.
std::vector<double> symmetric_eigenvalues(Matrix a);

/// Solve A x = b with partially pivoted LU. Throws ParameterError when the
/// matrix is numerically singular.
DenseVector solve_linear(Matrix a, DenseVector b);

/// Random orthogonal matrix: Gaussian fill + modified Gram-Schmidt.
Matrix random_orthogonal(int n, Rng& rng);

}  // namespace compsgd
