// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <string>

#include "mmsebcd/errors.hpp"

namespace mmsebcd {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

/// Relative eigenvalue floor used by every PSD assertion.
inline constexpr double kPsdTol = 1e-9;

/// Tolerance on the imaginary residue of mathematically real scalars.
inline constexpr double kImagTol = 1e-9;

inline Mat hermitian_part(const Mat& x) { return (x + x.adjoint()) * 0.5; }

inline bool is_hermitian(const Mat& x, double tol = 1e-9) {
  if (x.rows() != x.cols()) return false;
  return (x - x.adjoint()).norm() <= tol * (1.0 + x.norm());
}

/// Kronecker product a (x) b.
inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Column-major stacking.
inline Vec vec(const Mat& x) {
  return Eigen::Map<const Vec>(x.data(), x.size());
}

inline Mat unvec(const Vec& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols)
    throw ContractViolation("unvec: length " + std::to_string(v.size()) +
                            " does not match " + std::to_string(rows) + "x" +
                            std::to_string(cols));
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

/// Drops the imaginary part of a value that must be real, after checking
/// the residue is roundoff.
inline double real_scalar(cplx z, const char* what) {
  if (std::abs(z.imag()) > kImagTol * (1.0 + std::abs(z.real())))
    throw InternalError(std::string(what) + " has imaginary residue " +
                        std::to_string(z.imag()));
  return z.real();
}

/// Eigenvalues of a Hermitian matrix, ascending.
inline RVec hermitian_eigenvalues(const Mat& x) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(x),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline bool is_psd(const Mat& x, double rel_tol = kPsdTol) {
  if (x.size() == 0) return true;
  const RVec ev = hermitian_eigenvalues(x);
  const double top = std::max(ev.maxCoeff(), 0.0);
  return ev.minCoeff() >= -rel_tol * top;
}

/// Strict positive definiteness with a relative floor on the spectrum.
inline bool is_pd(const Mat& x, double rel_floor = 1e-12) {
  if (x.size() == 0) return false;
  const RVec ev = hermitian_eigenvalues(x);
  return ev.maxCoeff() > 0.0 && ev.minCoeff() > rel_floor * ev.maxCoeff();
}

/// Square root and inverse square root of a Hermitian PD matrix.
struct HermitianRoot {
  Mat root;
  Mat inv_root;
};

inline HermitianRoot hermitian_root(const Mat& x) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(x));
  if (es.info() != Eigen::Success)
    throw NumericalError("hermitian_root: eigendecomposition failed");
  const RVec& ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-12 * ev.maxCoeff()))
    throw ModelError("hermitian_root: matrix is not positive definite");
  const Mat& u = es.eigenvectors();
  HermitianRoot out;
  out.root = u * ev.cwiseSqrt().cast<cplx>().asDiagonal() * u.adjoint();
  out.inv_root = u * ev.cwiseSqrt().cwiseInverse().cast<cplx>().asDiagonal() *
                 u.adjoint();
  out.root = hermitian_part(out.root);
  out.inv_root = hermitian_part(out.inv_root);
  return out;
}

/// Real-composite lifting of a complex Hermitian quadratic form:
/// z^H X z == x^T lift(X) x with x = [Re z; Im z].
inline RMat lift_hermitian(const Mat& x) {
  const Eigen::Index n = x.rows();
  RMat out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = x.real();
  out.topRightCorner(n, n) = -x.imag();
  out.bottomLeftCorner(n, n) = x.imag();
  out.bottomRightCorner(n, n) = x.real();
  return out;
}

inline RVec lift(const Vec& z) {
  RVec out(2 * z.size());
  out << z.real(), z.imag();
  return out;
}

inline Vec unlift(const RVec& x) {
  const Eigen::Index n = x.size() / 2;
  Vec out(n);
  for (Eigen::Index k = 0; k < n; ++k) out(k) = cplx(x(k), x(n + k));
  return out;
}

}  // namespace mmsebcd
