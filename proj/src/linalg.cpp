// SPDX-License-Identifier: Apache-2.0
#include "compsgd/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "compsgd/errors.hpp"

namespace compsgd {

Matrix matrix_sum(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ParameterError("matrix_sum: shape mismatch");
  Matrix r = a;
  for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] += b.data()[i];
  return r;
}

Matrix matrix_scaled(const Matrix& a, double alpha) {
  Matrix r = a;
  for (double& v : r.data()) v *= alpha;
  return r;
}

DenseVector matvec(const Matrix& a, const DenseVector& x) {
  if (static_cast<std::size_t>(a.cols()) != x.size()) throw ParameterError("matvec: shape mismatch");
  DenseVector y(a.rows(), 0.0);
  for (int r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (int c = 0; c < a.cols(); ++c) s += a(r, c) * x[c];
    y[r] = s;
  }
  return y;
}

double quadratic_form(const Matrix& a, const DenseVector& x) { return dot(x, matvec(a, x)); }

bool is_symmetric(const Matrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = r + 1; c < a.cols(); ++c)
      if (std::fabs(a(r, c) - a(c, r)) > tol) return false;
  return true;
}

std::vector<double> symmetric_eigenvalues(Matrix a) {
  if (a.rows() != a.cols()) throw ParameterError("symmetric_eigenvalues: matrix must be square");
  if (!is_symmetric(a, 1e-9)) throw ParameterError("symmetric_eigenvalues: matrix must be symmetric");
  const int n = a.rows();
  if (n == 0) return {};
  // symmetrize exactly so rotations stay consistent
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c < n; ++c) {
      const double v = 0.5 * (a(r, c) + a(c, r));
      a(r, c) = v;
      a(c, r) = v;
    }
  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::fabs(a(i, i)));
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c < n; ++c) scale = std::max(scale, std::fabs(a(r, c)));
  if (scale == 0.0) return std::vector<double>(n, 0.0);

  for (int sweep = 0; sweep < 128; ++sweep) {
    double off = 0.0;
    for (int r = 0; r < n; ++r)
      for (int c = r + 1; c < n; ++c) off += a(r, c) * a(r, c);
    if (off <= (1e-15 * scale) * (1e-15 * scale) * n * n) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double app = a(p, p), aqq = a(q, q);
        a(p, p) = c * c * app - 2.0 * s * c * apq + s * s * aqq;
        a(q, q) = s * s * app + 2.0 * s * c * apq + c * c * aqq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (int r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p), arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(p, r) = a(r, p);
          a(r, q) = s * arp + c * arq;
          a(q, r) = a(r, q);
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (int i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

DenseVector solve_linear(Matrix a, DenseVector b) {
  if (a.rows() != a.cols()) throw ParameterError("solve_linear: matrix must be square");
  const int n = a.rows();
  if (static_cast<std::size_t>(n) != b.size()) throw ParameterError("solve_linear: shape mismatch");
  double scale = 0.0;
  for (double v : a.data()) scale = std::max(scale, std::fabs(v));
  if (scale == 0.0) throw ParameterError("solve_linear: singular matrix");

  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a(r, col)) > std::fabs(a(pivot, col))) pivot = r;
    if (std::fabs(a(pivot, col)) <= 1e-13 * scale) throw ParameterError("solve_linear: singular matrix");
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(a(pivot, c), a(col, c));
      std::swap(b[pivot], b[col]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      a(r, col) = 0.0;
      for (int c = col + 1; c < n; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  DenseVector x(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a(r, c) * x[c];
    x[r] = s / a(r, r);
  }
  return x;
}

Matrix random_orthogonal(int n, Rng& rng) {
  if (n <= 0) throw ParameterError("random_orthogonal: n must be positive");
  Matrix q(n, n);
  for (int col = 0; col < n; ++col) {
    while (true) {
      for (int r = 0; r < n; ++r) q(r, col) = rng.normal();
      for (int prev = 0; prev < col; ++prev) {
        double proj = 0.0;
        for (int r = 0; r < n; ++r) proj += q(r, col) * q(r, prev);
        for (int r = 0; r < n; ++r) q(r, col) -= proj * q(r, prev);
      }
      double nrm = 0.0;
      for (int r = 0; r < n; ++r) nrm += q(r, col) * q(r, col);
      nrm = std::sqrt(nrm);
      if (nrm > 1e-8) {
        for (int r = 0; r < n; ++r) q(r, col) /= nrm;
        break;
      }
      // essentially-degenerate draw; redo the column
    }
  }
  return q;
}

}  // namespace compsgd
