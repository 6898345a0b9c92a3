#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace millreduce {

// Solves A x = b for a symmetric positive definite matrix stored row-major
// (full square, upper triangle authoritative). Plain Cholesky first; if a
// pivot collapses, one retry with a 1e-12 diagonal ridge. Returns false if
// the system is still singular after the ridge. Problem sizes here stay in
// the low hundreds, so a dense O(n^3) factorization is the right tool.
inline bool cholesky_solve(std::vector<double> a, std::size_t n,
                           std::vector<double> b, std::vector<double>& x) {
  auto factor = [&](std::vector<double>& m) {
    for (std::size_t k = 0; k < n; ++k) {
      double d = m[k * n + k];
      for (std::size_t j = 0; j < k; ++j) d -= m[k * n + j] * m[k * n + j];
      if (!(d > 0.0) || !std::isfinite(d)) return false;
      const double lkk = std::sqrt(d);
      m[k * n + k] = lkk;
      for (std::size_t i = k + 1; i < n; ++i) {
        double s = m[i * n + k];
        for (std::size_t j = 0; j < k; ++j) s -= m[i * n + j] * m[k * n + j];
        m[i * n + k] = s / lkk;
      }
    }
    return true;
  };

  // Mirror the upper triangle; the factorization walks the lower one.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a[j * n + i] = a[i * n + j];

  std::vector<double> m = a;
  if (!factor(m)) {
    double max_diag = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      max_diag = std::max(max_diag, std::fabs(a[i * n + i]));
    m = a;
    for (std::size_t i = 0; i < n; ++i) m[i * n + i] += 1e-12 * max_diag;
    if (!factor(m)) return false;
  }

  // L y = b, then L^T x = y.
  x.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= m[i * n + j] * x[j];
    x[i] = s / m[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= m[j * n + ii] * x[j];
    x[ii] = s / m[ii * n + ii];
  }
  return true;
}

}  // namespace millreduce
