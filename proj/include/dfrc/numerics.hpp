/**
 * @file dfrc/numerics.hpp
 * @brief Complex dense linear algebra helpers: Hermitian wrapper, PSD tests,
 *        PSD square root and the real symmetric embedding.
 */
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <string_view>

#include "dfrc/errors.hpp"

namespace dfrc {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Element-wise Hermitian tolerance (scaled by max(1, max|a_ij|)).
inline constexpr double kHermitianTol = 1e-9;
/// Eigenvalues below -kPsdTol * scale reject a matrix as not PSD.
inline constexpr double kPsdTol = 1e-7;
/// Eigenvalues below kClipTol * scale are treated as exact zeros.
inline constexpr double kClipTol = 1e-12;

inline bool all_finite(const ComplexMatrix& a) {
  return a.array().isFinite().all();
}

inline void require_finite(const ComplexMatrix& a, std::string_view what) {
  if (!all_finite(a)) {
    throw NonFiniteValue(std::string(what) + " contains NaN or Inf");
  }
}

inline ComplexMatrix conj_transpose(const ComplexMatrix& a) {
  return a.adjoint();
}

inline bool is_hermitian(const ComplexMatrix& a, double tol = kHermitianTol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// A square complex matrix known to equal its conjugate transpose.
///
/// Construction validates the input and stores the exactly symmetrized
/// matrix 0.5 (A + A^H), so downstream eigen-solvers see a true Hermitian.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  explicit HermitianMatrix(const ComplexMatrix& a) {
    if (a.rows() != a.cols()) {
      throw ShapeError("Hermitian matrix must be square, got " +
                       std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()));
    }
    require_finite(a, "Hermitian matrix");
    if (!is_hermitian(a)) {
      throw NotHermitian("matrix differs from its conjugate transpose");
    }
    m_ = 0.5 * (a + a.adjoint());
  }

  static HermitianMatrix identity(Index n) {
    return HermitianMatrix(ComplexMatrix::Identity(n, n));
  }

  static HermitianMatrix zero(Index n) {
    return HermitianMatrix(ComplexMatrix::Zero(n, n));
  }

  /// G G^H.
  static HermitianMatrix gram(const ComplexMatrix& g) {
    return HermitianMatrix(ComplexMatrix(g * g.adjoint()));
  }

  Index dim() const { return m_.rows(); }
  const ComplexMatrix& matrix() const { return m_; }
  Complex operator()(Index i, Index j) const { return m_(i, j); }

  friend HermitianMatrix operator+(const HermitianMatrix& a,
                                   const HermitianMatrix& b) {
    return HermitianMatrix(ComplexMatrix(a.m_ + b.m_));
  }
  friend HermitianMatrix operator-(const HermitianMatrix& a,
                                   const HermitianMatrix& b) {
    return HermitianMatrix(ComplexMatrix(a.m_ - b.m_));
  }

 private:
  ComplexMatrix m_;
};

/// Ascending eigenvalues.
inline RealVector eigenvalues(const HermitianMatrix& a) {
  if (a.dim() == 0) return RealVector();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a.matrix(),
                                                  Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double min_eigenvalue(const HermitianMatrix& a) {
  if (a.dim() == 0) throw ShapeError("min_eigenvalue of an empty matrix");
  return eigenvalues(a)(0);
}

/// Validates the input first; non-Hermitian matrices are rejected.
inline double min_eigenvalue(const ComplexMatrix& a) {
  return min_eigenvalue(HermitianMatrix(a));
}

/// True when the smallest eigenvalue is at least -kPsdTol times the scale
/// (largest eigenvalue magnitude, or `reference_scale` if larger).
inline bool is_psd(const HermitianMatrix& a, double reference_scale = 0.0) {
  const RealVector ev = eigenvalues(a);
  if (ev.size() == 0) return true;
  const double scale =
      std::max({std::abs(ev(0)), std::abs(ev(ev.size() - 1)), reference_scale});
  return ev(0) >= -kPsdTol * scale;
}

/// F with F F^H = A, from the eigendecomposition A = V diag(l) V^H.
///
/// Eigenvalues in [-kPsdTol, kClipTol] * scale are clipped to zero; anything
/// more negative throws NotPositiveSemidefinite. `reference_scale` lets a
/// caller judge a residual against the magnitude of the matrix it came from.
inline ComplexMatrix psd_sqrt(const HermitianMatrix& a,
                              double reference_scale = 0.0) {
  const Index n = a.dim();
  if (n == 0) return ComplexMatrix(0, 0);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a.matrix());
  if (es.info() != Eigen::Success) {
    throw NotPositiveSemidefinite("eigendecomposition failed");
  }
  const RealVector& ev = es.eigenvalues();
  const double scale = std::max(
      {std::abs(ev(0)), std::abs(ev(n - 1)), reference_scale});
  if (ev(0) < -kPsdTol * scale) {
    throw NotPositiveSemidefinite("smallest eigenvalue " +
                                  std::to_string(ev(0)) + " below -psd_tol");
  }
  RealVector root(n);
  for (Index i = 0; i < n; ++i) {
    root(i) = ev(i) <= kClipTol * scale ? 0.0 : std::sqrt(ev(i));
  }
  return es.eigenvectors() * root.asDiagonal();
}

/// [[Re A, -Im A], [Im A, Re A]].
inline RealMatrix complex_to_real_embedding(const HermitianMatrix& a) {
  const Index n = a.dim();
  RealMatrix out(2 * n, 2 * n);
  const RealMatrix re = a.matrix().real();
  const RealMatrix im = a.matrix().imag();
  out.topLeftCorner(n, n) = re;
  out.topRightCorner(n, n) = -im;
  out.bottomLeftCorner(n, n) = im;
  out.bottomRightCorner(n, n) = re;
  return out;
}

inline double frobenius_distance(const ComplexMatrix& a,
                                 const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("frobenius_distance on mismatched shapes");
  }
  return (a - b).norm();
}

/// ||a - b||_F <= max(abs_tol, rel_tol * ||b||_F).
inline bool approx_equal(const ComplexMatrix& a, const ComplexMatrix& b,
                         double abs_tol, double rel_tol) {
  return frobenius_distance(a, b) <= std::max(abs_tol, rel_tol * b.norm());
}

}  // namespace dfrc
