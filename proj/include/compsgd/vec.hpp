// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "compsgd/errors.hpp"

namespace compsgd {

using DenseVector = std::vector<double>;

inline void require_same_size(const DenseVector& a, const DenseVector& b, const char* what) {
  if (a.size() != b.size()) throw ParameterError(std::string(what) + ": size mismatch");
}

inline double dot(const DenseVector& a, const DenseVector& b) {
  require_same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(const DenseVector& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double norm(const DenseVector& a) { return std::sqrt(squared_norm(a)); }

inline double l1_norm(const DenseVector& a) {
  double s = 0.0;
  for (double v : a) s += std::fabs(v);
  return s;
}

inline double linf_norm(const DenseVector& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

inline bool all_finite(const DenseVector& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

/// y += alpha * x
inline void axpy(DenseVector& y, double alpha, const DenseVector& x) {
  require_same_size(y, x, "axpy");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline DenseVector scaled(const DenseVector& a, double alpha) {
  DenseVector r(a);
  for (double& v : r) v *= alpha;
  return r;
}

inline DenseVector added(const DenseVector& a, const DenseVector& b) {
  require_same_size(a, b, "added");
  DenseVector r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

inline DenseVector subtracted(const DenseVector& a, const DenseVector& b) {
  require_same_size(a, b, "subtracted");
  DenseVector r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

inline double squared_distance(const DenseVector& a, const DenseVector& b) {
  require_same_size(a, b, "squared_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace compsgd
