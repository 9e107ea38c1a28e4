#pragma once
// Straight-line reference implementations used as test oracles. They are
// written independently of the library and favour clarity over speed.

#include <cmath>
#include <vector>

#include "mmlda/rng.hpp"
#include "mmlda/tensor.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline double inner(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Solve L y = b by forward substitution, L lower triangular.
inline std::vector<double> forward_solve(const Matrix& L, const std::vector<double>& b) {
  std::vector<double> y(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= L[i][j] * y[j];
    y[i] = s / L[i][i];
  }
  return y;
}

// Gauss-Jordan inverse with partial pivoting.
inline Matrix inverse(Matrix a) {
  const std::size_t n = a.size();
  Matrix inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    const double d = a[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      a[c][k] /= d;
      inv[c][k] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      for (std::size_t k = 0; k < n; ++k) {
        a[r][k] -= f * a[c][k];
        inv[r][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

// sqrt((a-b)^T S^{-1} (a-b)) through an explicit inverse.
inline double mahalanobis(const std::vector<double>& a, const std::vector<double>& b, const Matrix& S) {
  const Matrix inv = inverse(S);
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  double s = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j) s += d[i] * inv[i][j] * d[j];
  return std::sqrt(s);
}

inline Matrix random_spd(std::size_t p, mmlda::Rng& rng) {
  Matrix a(p, std::vector<double>(p));
  for (auto& row : a)
    for (double& v : row) v = rng.normal();
  Matrix s(p, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = 0; k < p; ++k) s[i][j] += a[i][k] * a[j][k];
      if (i == j) s[i][j] += 0.5;
    }
  return s;
}

inline mmlda::Tensor to_tensor(const Matrix& m) { return mmlda::Tensor::from_rows(m); }

// Standard normal CDF via a slowly-converging but independent series:
// Phi(x) = 1/2 + phi(x) * sum x^(2n+1) / (1*3*...*(2n+1)), good for |x| < 8.
inline double normal_cdf_series(double x) {
  double term = x, sum = x;
  for (int n = 1; n < 500; ++n) {
    term *= x * x / (2 * n + 1);
    sum += term;
  }
  return 0.5 + sum * std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI);
}

// Dense-layer forward written out loop by loop.
inline std::vector<double> dense(const std::vector<double>& x, const mmlda::Tensor& w,
                                 const std::vector<double>& b, bool relu) {
  std::vector<double> out(w.rows());
  for (std::size_t o = 0; o < w.rows(); ++o) {
    double s = b[o];
    for (std::size_t i = 0; i < w.cols(); ++i) s += w(o, i) * x[i];
    out[o] = relu ? (s > 0 ? s : 0.0) : s;
  }
  return out;
}

}  // namespace oracle
