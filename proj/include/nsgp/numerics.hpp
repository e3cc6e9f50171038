#pragma once

// Dense symmetric-positive-definite linear algebra used by every other
// module. Row-major storage; problem sizes stay in the low hundreds, so
// everything is plain loops over contiguous rows.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "nsgp/errors.hpp"

namespace nsgp {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionMismatch("ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_column(const Vector& v) {
    Matrix m(v.size(), 1);
    m.data_ = v;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  Vector col(std::size_t j) const {
    Vector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data() + k * b.cols();
      double* crow = c.data() + i * c.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

inline Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) throw DimensionMismatch("matvec: dimensions differ");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* row = a.data() + i * a.cols();
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

inline Vector matvec_t(const Matrix& a, const Vector& x) {
  if (a.rows() != x.size()) throw DimensionMismatch("matvec_t: dimensions differ");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* row = a.data() + i * a.cols();
    const double xi = x[i];
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += row[j] * xi;
  }
  return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Lower-triangular Cholesky factor of A + jitter_used * I.
struct CholFactor {
  Matrix lower;
  double jitter_used = 0.0;

  std::size_t dim() const { return lower.rows(); }
};

namespace detail {

// In-place attempt; returns false on a non-positive pivot.
inline bool cholesky_in_place(const Matrix& a, double jitter, Matrix& lower) {
  const std::size_t n = a.rows();
  lower = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double* li = lower.data() + i * n;
    for (std::size_t j = 0; j <= i; ++j) {
      const double* lj = lower.data() + j * n;
      double s = a(i, j) + (i == j ? jitter : 0.0);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      if (i == j) {
        if (!(s > 0.0)) return false;
        li[j] = std::sqrt(s);
      } else {
        li[j] = s / lj[j];
      }
    }
  }
  return true;
}

}  // namespace detail

// Factor A (+ escalating jitter) with A symmetric within 1e-10 relative
// tolerance. Jitter grows geometrically (x10) from base_jitter up to
// 1e-2 * mean(diag(A)); exceeding the cap raises NotPositiveDefinite.
inline CholFactor cholesky_psd(const Matrix& a, double base_jitter) {
  if (a.rows() != a.cols()) throw NonSymmetric("cholesky_psd: matrix not square");
  if (!a.all_finite()) throw NonFinite("cholesky_psd: non-finite entries");

  const std::size_t n = a.rows();
  double max_abs = 0.0;
  double max_asym = 0.0;
  double diag_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diag_sum += a(i, i);
    for (std::size_t j = 0; j < n; ++j) {
      max_abs = std::max(max_abs, std::abs(a(i, j)));
      if (j > i) max_asym = std::max(max_asym, std::abs(a(i, j) - a(j, i)));
    }
  }
  if (max_asym > 1e-10 * std::max(1.0, max_abs))
    throw NonSymmetric("cholesky_psd: matrix not symmetric");

  const double mean_diag = n == 0 ? 0.0 : diag_sum / static_cast<double>(n);
  const double cap = 1e-2 * mean_diag;

  CholFactor f;
  double jitter = base_jitter;
  while (true) {
    if (detail::cholesky_in_place(a, jitter, f.lower)) {
      f.jitter_used = jitter;
      return f;
    }
    if (jitter >= cap || !(cap > 0.0))
      throw NotPositiveDefinite("cholesky_psd: jitter cap reached");
    jitter = jitter > 0.0 ? jitter * 10.0 : std::max(cap * 1e-10, 1e-300);
    if (jitter > cap) jitter = cap;
  }
}

inline Vector solve_lower(const Matrix& l, const Vector& b) {
  const std::size_t n = l.rows();
  if (b.size() != n) throw DimensionMismatch("solve_lower: size mismatch");
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = l.data() + i * n;
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= li[k] * x[k];
    x[i] = s / li[i];
  }
  return x;
}

inline Vector solve_lower_transpose(const Matrix& l, const Vector& b) {
  const std::size_t n = l.rows();
  if (b.size() != n) throw DimensionMismatch("solve_lower_transpose: size mismatch");
  Vector x(n);
  for (std::size_t ip = n; ip-- > 0;) {
    double s = b[ip];
    for (std::size_t k = ip + 1; k < n; ++k) s -= l(k, ip) * x[k];
    x[ip] = s / l(ip, ip);
  }
  return x;
}

inline Vector solve_chol(const CholFactor& f, const Vector& b) {
  return solve_lower_transpose(f.lower, solve_lower(f.lower, b));
}

// (A + jitter I)^{-1} B column by column.
inline Matrix solve_chol(const CholFactor& f, const Matrix& b) {
  if (b.rows() != f.dim()) throw DimensionMismatch("solve_chol: row count mismatch");
  Matrix x(b.rows(), b.cols());
  Vector col(b.rows());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
    Vector sol = solve_chol(f, col);
    for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = sol[i];
  }
  return x;
}

// L^{-1} B with multiple right-hand sides.
inline Matrix solve_lower_multi(const Matrix& l, const Matrix& b) {
  const std::size_t n = l.rows();
  if (b.rows() != n) throw DimensionMismatch("solve_lower_multi: row count mismatch");
  const std::size_t m = b.cols();
  Matrix x = b;
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = l.data() + i * n;
    double* xi = x.data() + i * m;
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = li[k];
      if (lik == 0.0) continue;
      const double* xk = x.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) xi[j] -= lik * xk[j];
    }
    const double inv = 1.0 / li[i];
    for (std::size_t j = 0; j < m; ++j) xi[j] *= inv;
  }
  return x;
}

// L^{-T} B with multiple right-hand sides.
inline Matrix solve_lower_transpose_multi(const Matrix& l, const Matrix& b) {
  const std::size_t n = l.rows();
  if (b.rows() != n) throw DimensionMismatch("solve_lower_transpose_multi: row mismatch");
  const std::size_t m = b.cols();
  Matrix x = b;
  for (std::size_t ip = n; ip-- > 0;) {
    double* xi = x.data() + ip * m;
    for (std::size_t k = ip + 1; k < n; ++k) {
      const double lki = l(k, ip);
      if (lki == 0.0) continue;
      const double* xk = x.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) xi[j] -= lki * xk[j];
    }
    const double inv = 1.0 / l(ip, ip);
    for (std::size_t j = 0; j < m; ++j) xi[j] *= inv;
  }
  return x;
}

// Explicit (A + jitter I)^{-1} via L^{-T} L^{-1}; used by the trainer once
// per epoch, so the triangular inverse is formed directly.
inline Matrix chol_inverse(const CholFactor& f) {
  const std::size_t n = f.dim();
  const Matrix& l = f.lower;
  // Invert L in place of a copy: forward substitution per column.
  Matrix linv(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    linv(j, j) = 1.0 / l(j, j);
    for (std::size_t i = j + 1; i < n; ++i) {
      const double* li = l.data() + i * n;
      double s = 0.0;
      for (std::size_t k = j; k < i; ++k) s -= li[k] * linv(k, j);
      linv(i, j) = s / li[i];
    }
  }
  // A^{-1} = L^{-T} L^{-1}; both triangular, fill the symmetric result.
  Matrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = i; k < n; ++k) s += linv(k, i) * linv(k, j);
      inv(i, j) = s;
      inv(j, i) = s;
    }
  }
  return inv;
}

inline double logdet(const CholFactor& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.dim(); ++i) s += std::log(f.lower(i, i));
  return 2.0 * s;
}

}  // namespace nsgp
