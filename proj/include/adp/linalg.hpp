#pragma once

// Dense real linear algebra: row-major matrices, vectors, products,
// Cholesky solves, one-sided Jacobi SVD and power iteration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "adp/error.hpp"

namespace adp {

using Vec64 = std::vector<double>;

namespace linalg_tol {
/// Jacobi pair (p,q) is considered orthogonal below this normalized overlap.
inline constexpr double svd_rotation = 1e-12;
inline constexpr int svd_max_sweeps = 60;
inline constexpr double svd_orthogonality = 1e-10;
inline constexpr double svd_reconstruction = 1e-9;
inline constexpr double spd_residual = 1e-10;
inline constexpr std::size_t power_iters = 500;
inline constexpr double power_relative = 1e-8;
}  // namespace linalg_tol

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw ValidationError("DenseMatrix: data length does not match shape");
  }
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ValidationError("DenseMatrix: ragged rows");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix diagonal(std::span<const double> d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  Vec64 col(std::size_t j) const {
    Vec64 c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---- vector helpers -------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline Vec64 operator+(const Vec64& a, const Vec64& b) {
  if (a.size() != b.size()) throw ValidationError("vector add: length mismatch");
  Vec64 r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

inline Vec64 operator-(const Vec64& a, const Vec64& b) {
  if (a.size() != b.size()) throw ValidationError("vector sub: length mismatch");
  Vec64 r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

inline Vec64 operator*(double s, const Vec64& a) {
  Vec64 r(a);
  for (double& v : r) v *= s;
  return r;
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

// ---- matrix helpers -------------------------------------------------------

inline DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    std::ostringstream os;
    os << "matmul: dimension mismatch " << a.rows() << "x" << a.cols() << " * " << b.rows()
       << "x" << b.cols();
    throw ValidationError(os.str());
  }
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

/// mᵀm, exploiting symmetry.
inline DenseMatrix gram(const DenseMatrix& m) {
  const std::size_t n = m.cols();
  DenseMatrix g(n, n);
  for (std::size_t k = 0; k < m.rows(); ++k) {
    auto mk = m.row(k);
    for (std::size_t i = 0; i < n; ++i) {
      const double mki = mk[i];
      if (mki == 0.0) continue;
      auto gi = g.row(i);
      for (std::size_t j = i; j < n; ++j) gi[j] += mki * mk[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

inline Vec64 matvec(const DenseMatrix& m, std::span<const double> x) {
  if (m.cols() != x.size()) throw ValidationError("matvec: dimension mismatch");
  Vec64 y(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row(i), x);
  return y;
}

/// mᵀx without forming the transpose.
inline Vec64 matvec_t(const DenseMatrix& m, std::span<const double> x) {
  if (m.rows() != x.size()) throw ValidationError("matvec_t: dimension mismatch");
  Vec64 y(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    auto mi = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) y[j] += xi * mi[j];
  }
  return y;
}

inline DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError("matrix add: dimension mismatch");
  DenseMatrix r(a);
  for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] += b.data()[i];
  return r;
}

inline DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError("matrix sub: dimension mismatch");
  DenseMatrix r(a);
  for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] -= b.data()[i];
  return r;
}

inline DenseMatrix operator*(double s, const DenseMatrix& a) {
  DenseMatrix r(a);
  for (double& v : r.data()) v *= s;
  return r;
}

/// m += s · a bᵀ
inline void add_outer(DenseMatrix& m, double s, std::span<const double> a,
                      std::span<const double> b) {
  if (m.rows() != a.size() || m.cols() != b.size())
    throw ValidationError("add_outer: dimension mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double sa = s * a[i];
    if (sa == 0.0) continue;
    auto mi = m.row(i);
    for (std::size_t j = 0; j < b.size(); ++j) mi[j] += sa * b[j];
  }
}

inline double frobenius_sq(const DenseMatrix& m) { return dot(m.data(), m.data()); }

inline double max_abs(const DenseMatrix& m) { return max_abs(std::span<const double>(m.data())); }

// ---- Cholesky / SPD solves -------------------------------------------------

/// Lower-triangular factor of a symmetric positive definite matrix.
class Cholesky {
 public:
  explicit Cholesky(const DenseMatrix& m) : l_(m.rows(), m.cols()) {
    if (!m.square()) throw ValidationError("cholesky: matrix is not square");
    const std::size_t n = m.rows();
    for (std::size_t j = 0; j < n; ++j) {
      auto lj = l_.row(j);
      double d = m(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= lj[k] * lj[k];
      if (!(d > 0.0)) {
        std::ostringstream os;
        os << "cholesky: breakdown at pivot " << j << " (value " << d
           << "), matrix is not positive definite";
        throw NumericalError(os.str());
      }
      const double ljj = std::sqrt(d);
      lj[j] = ljj;
      for (std::size_t i = j + 1; i < n; ++i) {
        auto li = l_.row(i);
        double s = m(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
        li[j] = s / ljj;
      }
    }
  }

  std::size_t size() const { return l_.rows(); }
  const DenseMatrix& factor() const { return l_; }

  Vec64 solve(std::span<const double> rhs) const {
    const std::size_t n = size();
    if (rhs.size() != n) throw ValidationError("cholesky solve: dimension mismatch");
    Vec64 x(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < n; ++i) {
      auto li = l_.row(i);
      double s = x[i];
      for (std::size_t k = 0; k < i; ++k) s -= li[k] * x[k];
      x[i] = s / li[i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l_(k, ii) * x[k];
      x[ii] = s / l_(ii, ii);
    }
    return x;
  }

 private:
  DenseMatrix l_;
};

inline Vec64 solve_spd(const DenseMatrix& m, std::span<const double> rhs) {
  return Cholesky(m).solve(rhs);
}

// ---- SVD -------------------------------------------------------------------

/// Singular system of m: m·u_i = σ_i v_i and mᵀ·v_i = σ_i u_i.
/// Columns of `u` live in the input space, columns of `v` in the output space.
struct Svd {
  DenseMatrix u;
  Vec64 sigma;
  DenseMatrix v;

  std::size_t rank_size() const { return sigma.size(); }
};

/// Σ σ_i v_i u_iᵀ
inline DenseMatrix reconstruct(const Svd& s) {
  DenseMatrix m(s.v.rows(), s.u.rows());
  for (std::size_t k = 0; k < s.sigma.size(); ++k) add_outer(m, s.sigma[k], s.v.col(k), s.u.col(k));
  return m;
}

namespace detail {

// Completes `cols` (unit vectors, some possibly empty) to an orthonormal set
// by Gram-Schmidt against the canonical basis.
inline void complete_orthonormal(std::vector<Vec64>& cols, std::size_t dim) {
  std::size_t probe = 0;
  for (auto& c : cols) {
    if (!c.empty()) continue;
    while (probe < dim) {
      Vec64 e(dim, 0.0);
      e[probe++] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& o : cols)
          if (!o.empty() && &o != &c) {
            const double p = dot(o, e);
            for (std::size_t i = 0; i < dim; ++i) e[i] -= p * o[i];
          }
      const double nrm = norm2(e);
      if (nrm > 1e-8) {
        for (double& x : e) x /= nrm;
        c = std::move(e);
        break;
      }
    }
  }
}

// One-sided Jacobi on a tall (rows >= cols) matrix.
inline Svd jacobi_svd_tall(const DenseMatrix& m) {
  const std::size_t rows = m.rows();
  const std::size_t n = m.cols();
  // Columns of the working matrix and of the accumulated right rotations,
  // stored contiguously.
  std::vector<Vec64> w(n, Vec64(rows));
  std::vector<Vec64> q(n, Vec64(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < rows; ++i) w[j][i] = m(i, j);
    q[j][j] = 1.0;
  }

  double worst = 0.0;
  bool converged = false;
  for (int sweep = 0; sweep < linalg_tol::svd_max_sweeps && !converged; ++sweep) {
    worst = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t r = p + 1; r < n; ++r) {
        const double a = dot(w[p], w[p]);
        const double b = dot(w[r], w[r]);
        const double c = dot(w[p], w[r]);
        if (a == 0.0 || b == 0.0) continue;
        const double overlap = std::abs(c) / std::sqrt(a * b);
        worst = std::max(worst, overlap);
        if (overlap <= linalg_tol::svd_rotation) continue;
        const double zeta = (b - a) / (2.0 * c);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double cs = 1.0 / std::hypot(1.0, t);
        const double sn = cs * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double wp = w[p][i], wr = w[r][i];
          w[p][i] = cs * wp - sn * wr;
          w[r][i] = sn * wp + cs * wr;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double qp = q[p][i], qr = q[r][i];
          q[p][i] = cs * qp - sn * qr;
          q[r][i] = sn * qp + cs * qr;
        }
      }
    }
    converged = worst <= linalg_tol::svd_rotation;
  }
  if (!converged) {
    std::ostringstream os;
    os << "svd: no convergence after " << linalg_tol::svd_max_sweeps << " sweeps for " << rows
       << "x" << n << " matrix (largest residual overlap " << worst << ")";
    throw NumericalError(os.str());
  }

  std::vector<std::size_t> order(n);
  Vec64 norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    order[j] = j;
    norms[j] = norm2(w[j]);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return norms[i] > norms[j]; });

  const double scale = norms.empty() ? 0.0 : norms[order.front()];
  const double zero_cut = scale * 1e-14 * static_cast<double>(std::max(rows, n));
  Svd out;
  out.sigma.resize(n);
  std::vector<Vec64> left(n);
  std::vector<Vec64> right(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    right[k] = q[j];
    if (norms[j] > zero_cut && norms[j] > 0.0) {
      out.sigma[k] = norms[j];
      left[k] = (1.0 / norms[j]) * w[j];
    } else {
      out.sigma[k] = 0.0;
    }
  }
  complete_orthonormal(left, rows);

  out.u = DenseMatrix(n, n);
  out.v = DenseMatrix(rows, n);
  for (std::size_t k = 0; k < n; ++k) {
    // Deterministic signs: first nonzero entry of each output-space vector is positive.
    double sign = 1.0;
    for (double x : left[k])
      if (std::abs(x) > 1e-14) {
        sign = x < 0.0 ? -1.0 : 1.0;
        break;
      }
    for (std::size_t i = 0; i < n; ++i) out.u(i, k) = sign * right[k][i];
    for (std::size_t i = 0; i < rows; ++i) out.v(i, k) = sign * left[k][i];
  }
  return out;
}

}  // namespace detail

/// Thin SVD with min(rows, cols) singular triples, sorted nonincreasing.
inline Svd svd(const DenseMatrix& m) {
  if (!all_finite(m.data())) throw ValidationError("svd: non-finite input");
  if (m.rows() >= m.cols()) return detail::jacobi_svd_tall(m);
  // mᵀ = Σ σ u vᵀ: swap the roles of the two spaces.
  Svd t = detail::jacobi_svd_tall(transpose(m));
  Svd out{std::move(t.v), std::move(t.sigma), std::move(t.u)};
  for (std::size_t k = 0; k < out.sigma.size(); ++k) {
    double sign = 1.0;
    for (std::size_t i = 0; i < out.v.rows(); ++i)
      if (std::abs(out.v(i, k)) > 1e-14) {
        sign = out.v(i, k) < 0.0 ? -1.0 : 1.0;
        break;
      }
    if (sign < 0.0) {
      for (std::size_t i = 0; i < out.u.rows(); ++i) out.u(i, k) = -out.u(i, k);
      for (std::size_t i = 0; i < out.v.rows(); ++i) out.v(i, k) = -out.v(i, k);
    }
  }
  return out;
}

// ---- power iteration -------------------------------------------------------

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
inline double dominant_eigenvalue(const DenseMatrix& m,
                                  std::size_t iters = linalg_tol::power_iters,
                                  std::uint64_t seed = 0) {
  if (!m.square()) throw ValidationError("dominant_eigenvalue: matrix is not square");
  const std::size_t n = m.rows();
  if (n == 0) return 0.0;
  std::mt19937_64 gen(seed);
  Vec64 x(n);
  // Strictly positive start avoids orthogonality to the Perron direction of
  // nonnegative matrices; the random jitter covers everything else.
  for (double& v : x) v = 1.0 + static_cast<double>(gen() >> 11) * 0x1.0p-53;
  double nrm = norm2(x);
  for (double& v : x) v /= nrm;
  double lambda = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    Vec64 y = matvec(m, x);
    lambda = dot(x, y);
    nrm = norm2(y);
    if (nrm == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / nrm;
  }
  return dot(x, matvec(m, x));
}

}  // namespace adp
