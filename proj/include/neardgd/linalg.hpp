#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "neardgd/errors.hpp"

// Dense kernels with a fixed summation order.
//
// Eigen matrices are used as storage throughout the library, but its product
// and reduction kernels choose SIMD-width dependent groupings, which makes
// results differ in the last ulp between machines. Everything that feeds a
// recorded trajectory goes through the plain loops below instead. Eigen's own
// kernels remain fine for tests and oracles.

namespace neardgd::lin {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(const Vector& v) { return dot(v, v); }

inline double norm(const Vector& v) { return std::sqrt(squared_norm(v)); }

inline double squared_frobenius(const Matrix& m) {
  double s = 0.0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) s += m(i, j) * m(i, j);
  return s;
}

inline double frobenius(const Matrix& m) {
  return std::sqrt(squared_frobenius(m));
}

inline void matmul_into(Matrix& out, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: shape mismatch");
  out.resize(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out;
  matmul_into(out, a, b);
  return out;
}

inline Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) throw DimensionError("matvec: shape mismatch");
  Vector out(a.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (Index k = 0; k < a.cols(); ++k) s += a(i, k) * x[k];
    out[i] = s;
  }
  return out;
}

// Column means of an n-by-p stacked state, i.e. the network average point.
inline Vector column_mean(const Matrix& m) {
  if (m.rows() == 0) throw DimensionError("column_mean: empty matrix");
  Vector out(m.cols());
  const double inv_n = 1.0 / static_cast<double>(m.rows());
  for (Index j = 0; j < m.cols(); ++j) {
    double s = 0.0;
    for (Index i = 0; i < m.rows(); ++i) s += m(i, j);
    out[j] = s * inv_n;
  }
  return out;
}

// Replicates a row vector n times (all agents at the same point).
inline Matrix replicate_rows(const Vector& v, Index n) {
  Matrix out(n, v.size());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < v.size(); ++j) out(i, j) = v[j];
  return out;
}

// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, ascending.
//
// Jacobi is used instead of Eigen's solver because its rotation sequence is
// fully determined by the sweep order, giving bit-identical spectra across
// platforms. Fine for the small matrices handled here (network sizes).
inline std::vector<double> symmetric_eigenvalues(Matrix a) {
  if (a.rows() != a.cols())
    throw DimensionError("symmetric_eigenvalues: matrix must be square");
  const Index n = a.rows();
  std::vector<double> ev(static_cast<std::size_t>(n));
  if (n == 1) {
    ev[0] = a(0, 0);
    return ev;
  }

  const double scale = std::sqrt(squared_frobenius(a));
  const double tol = 1e-15 * (scale > 0.0 ? scale : 1.0);
  constexpr int kMaxSweeps = 64;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= tol) break;

    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= tol * 1e-3) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t =
            (theta >= 0.0)
                ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                : 1.0 / (theta - std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }

  for (Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace neardgd::lin
