#pragma once

#include <Eigen/Eigenvalues>

#include "mehlerlab/types.hpp"

namespace mehlerlab {

/// Symmetric eigendecomposition of a PSD matrix with clamping of small
/// negative eigenvalues, exposing the square root and pseudo-inverse
/// square-root solves used by the range tests.
class PsdSqrt {
 public:
  explicit PsdSqrt(const Mat& R, double clamp_rel = 1e-10, double sym_tol = 1e-12) {
    if (R.rows() != R.cols()) throw DomainError("PsdSqrt: matrix not square");
    if (!is_finite(R)) throw DomainError("PsdSqrt: non-finite entries");
    const double scale = R.cwiseAbs().maxCoeff();
    if ((R - R.transpose()).cwiseAbs().maxCoeff() > sym_tol * std::max(1.0, scale))
      throw DomainError("PsdSqrt: matrix not symmetric");
    const Mat S = 0.5 * (R + R.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    if (es.info() != Eigen::Success) throw NumericalError("PsdSqrt: eigensolver failed");
    q_ = es.eigenvectors();
    lambda_ = es.eigenvalues();
    const double norm = lambda_.cwiseAbs().maxCoeff();
    for (int i = 0; i < lambda_.size(); ++i) {
      if (lambda_(i) < -clamp_rel * std::max(norm, 1e-300))
        throw DomainError("PsdSqrt: eigenvalue below PSD clamp threshold");
      if (lambda_(i) < 0.0) lambda_(i) = 0.0;
    }
    sqrt_lambda_ = lambda_.cwiseSqrt();
    sqrt_ = q_ * sqrt_lambda_.asDiagonal() * q_.transpose();
  }

  const Mat& sqrt() const { return sqrt_; }
  const Vec& eigenvalues() const { return lambda_; }
  /// Singular values of R^{1/2} (the clamped sqrt-eigenvalues).
  const Vec& singular_values() const { return sqrt_lambda_; }
  double trace() const { return lambda_.sum(); }
  int dim() const { return static_cast<int>(lambda_.size()); }

  Vec apply_sqrt(const Vec& v) const { return sqrt_ * v; }

  struct Solve {
    Vec w;
    double residual;  // norm of R^{1/2} w - v
  };

  /// Least-squares solve of R^{1/2} w = v through the eigenbasis.
  /// Singular values at or below sv_cutoff_rel * sigma_max count as zero.
  Solve solve_sqrt(const Vec& v, double sv_cutoff_rel = 1e-10) const {
    const double smax = sqrt_lambda_.size() > 0 ? sqrt_lambda_.maxCoeff() : 0.0;
    const double cutoff = sv_cutoff_rel * smax;
    const Vec vh = q_.transpose() * v;
    Vec wh = Vec::Zero(vh.size());
    double res2 = 0.0;
    for (int i = 0; i < vh.size(); ++i) {
      if (sqrt_lambda_(i) > cutoff && sqrt_lambda_(i) > 0.0) {
        wh(i) = vh(i) / sqrt_lambda_(i);
      } else {
        res2 += vh(i) * vh(i);
      }
    }
    return {q_ * wh, std::sqrt(res2)};
  }

  /// Pseudo-inverse square root applied to the columns of M; columns with a
  /// relative residual above tau produce an infinite-range flag.
  Mat pinv_sqrt_times(const Mat& M, double sv_cutoff_rel = 1e-10) const {
    const double smax = sqrt_lambda_.size() > 0 ? sqrt_lambda_.maxCoeff() : 0.0;
    const double cutoff = sv_cutoff_rel * smax;
    Vec inv = Vec::Zero(sqrt_lambda_.size());
    for (int i = 0; i < inv.size(); ++i)
      if (sqrt_lambda_(i) > cutoff && sqrt_lambda_(i) > 0.0) inv(i) = 1.0 / sqrt_lambda_(i);
    return q_ * inv.asDiagonal() * q_.transpose() * M;
  }

  int rank(double sv_cutoff_rel = 1e-10) const {
    const double smax = sqrt_lambda_.size() > 0 ? sqrt_lambda_.maxCoeff() : 0.0;
    const double cutoff = sv_cutoff_rel * smax;
    int r = 0;
    for (int i = 0; i < sqrt_lambda_.size(); ++i)
      if (sqrt_lambda_(i) > cutoff && sqrt_lambda_(i) > 0.0) ++r;
    return r;
  }

 private:
  Mat q_;
  Vec lambda_;
  Vec sqrt_lambda_;
  Mat sqrt_;
};

}  // namespace mehlerlab
