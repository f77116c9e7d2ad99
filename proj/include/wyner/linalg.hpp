#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace wyner {

// Minimal dense square-matrix helpers for the fusion layer. Dimensions here
// are latent-feature sizes (single digits), so clarity beats BLAS.
struct Mat {
  std::size_t n = 0;
  std::vector<double> a;  // row-major n x n

  Mat() = default;
  explicit Mat(std::size_t dim) : n(dim), a(dim * dim, 0.0) {}

  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }

  static Mat identity(std::size_t dim) {
    Mat m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline bool is_symmetric(const Mat& m, double tol = 1e-10) {
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = i + 1; j < m.n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
  return true;
}

// Lower-triangular Cholesky factor, or nullopt when the matrix is not
// positive definite. Doubles as the SPD check.
inline std::optional<Mat> cholesky(const Mat& m) {
  Mat l(m.n);
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (!(s > 0.0)) return std::nullopt;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

inline std::vector<double> chol_solve(const Mat& l, const std::vector<double>& b) {
  std::vector<double> y(b.size());
  for (std::size_t i = 0; i < l.n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  for (std::size_t i = l.n; i-- > 0;) {
    double s = y[i];
    for (std::size_t k = i + 1; k < l.n; ++k) s -= l(k, i) * y[k];
    y[i] = s / l(i, i);
  }
  return y;
}

inline Mat chol_inverse(const Mat& l) {
  Mat inv(l.n);
  std::vector<double> e(l.n, 0.0);
  for (std::size_t j = 0; j < l.n; ++j) {
    e[j] = 1.0;
    const std::vector<double> col = chol_solve(l, e);
    for (std::size_t i = 0; i < l.n; ++i) inv(i, j) = col[i];
    e[j] = 0.0;
  }
  // symmetrize away rounding
  for (std::size_t i = 0; i < l.n; ++i)
    for (std::size_t j = i + 1; j < l.n; ++j) {
      const double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = inv(j, i) = v;
    }
  return inv;
}

inline double logdet_from_chol(const Mat& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.n; ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

inline double trace(const Mat& m) {
  double t = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) t += m(i, i);
  return t;
}

inline std::vector<double> matvec(const Mat& m, const std::vector<double>& v) {
  std::vector<double> out(m.n, 0.0);
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = 0; j < m.n; ++j) out[i] += m(i, j) * v[j];
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace wyner
