#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>

#include <Eigen/Dense>

#include "ensemble.hpp"

namespace shrinkda {

/// (Gamma + Pi Pi^T) Z = rhs with Gamma^{-1} supplied as an operation.
struct ObservationSpaceSystem {
  std::function<Matrix(const Matrix&)> gamma_inverse_apply;
  Matrix pi;
  Matrix rhs;
};

/// Gamma^{-1} for diagonal Gamma; applied component-wise.
inline std::function<Matrix(const Matrix&)> diagonal_gamma_inverse(const Vector& gamma_diag) {
  detail::require((gamma_diag.array() > 0.0).all(), "diagonal Gamma must be positive");
  Vector inv = gamma_diag.cwiseInverse();
  return [inv = std::move(inv)](const Matrix& m) -> Matrix { return inv.asDiagonal() * m; };
}

/// Gamma^{-1} for a general SPD Gamma through a Cholesky factor computed once.
inline std::function<Matrix(const Matrix&)> dense_gamma_inverse(const Matrix& gamma) {
  auto llt = std::make_shared<Eigen::LLT<Matrix>>(gamma);
  if (llt->info() != Eigen::Success) throw NumericalError("Gamma is not positive definite");
  return [llt](const Matrix& m) -> Matrix { return llt->solve(m); };
}

inline constexpr double kIsmfPivotTolerance = 1e-14;

/// Iterative Sherman-Morrison solve.
///
///   Z0 = Gamma^{-1} D,   U0 = Gamma^{-1} Pi
///   h_k = u_k / (1 + v_k^T u_k)
///   Z_k = Z_{k-1} - h_k (v_k^T Z_{k-1}),   U_k = U_{k-1} - h_k (v_k^T U_{k-1})
///
/// Only the columns of U past k are updated since earlier ones are not read
/// again.  Throws NumericalError("ISMF breakdown") on a vanishing pivot.
inline Matrix ismf_solve(const ObservationSpaceSystem& sys) {
  const Index nobs = sys.rhs.rows();
  const Index m = sys.pi.cols();
  if (m > 0 && sys.pi.rows() != nobs) throw InvalidArgument("ismf: Pi and rhs row counts differ");
  Matrix z = sys.gamma_inverse_apply(sys.rhs);
  if (m == 0) return z;
  Matrix u = sys.gamma_inverse_apply(sys.pi);
  for (Index k = 0; k < m; ++k) {
    const auto v = sys.pi.col(k);
    const double pivot = 1.0 + v.dot(u.col(k));
    if (!(std::abs(pivot) >= kIsmfPivotTolerance)) throw NumericalError("ISMF breakdown");
    const Vector h = u.col(k) / pivot;
    z.noalias() -= h * (v.transpose() * z);
    const Index rest = m - k - 1;
    if (rest > 0) u.rightCols(rest).noalias() -= h * (v.transpose() * u.rightCols(rest));
  }
  return z;
}

inline constexpr Index kDenseFallbackLimit = 5000;

/// Dense LU solve of (Gamma + Pi Pi^T) Z = D; Gamma^{-1} is materialised column by column.
inline Matrix dense_observation_solve(const ObservationSpaceSystem& sys) {
  const Index nobs = sys.rhs.rows();
  const Matrix gamma_inv = sys.gamma_inverse_apply(Matrix::Identity(nobs, nobs));
  Matrix lhs = Matrix::Identity(nobs, nobs);
  if (sys.pi.cols() > 0) lhs.noalias() += gamma_inv * (sys.pi * sys.pi.transpose());
  return lhs.partialPivLu().solve(gamma_inv * sys.rhs);
}

/// ISMF with a dense fallback on breakdown for nobs up to kDenseFallbackLimit.
inline Matrix solve_observation_space(const ObservationSpaceSystem& sys) {
  try {
    return ismf_solve(sys);
  } catch (const NumericalError&) {
    if (sys.rhs.rows() > kDenseFallbackLimit) throw;
    return dense_observation_solve(sys);
  }
}

/// Symmetric square root of I - V^T Z_V where W_obs Z_V = V.
///
/// V^T Z_V is symmetric by construction, so a symmetric eigendecomposition
/// replaces the SVD: V^T Z_V = Q L Q^T gives Q (I - L)^{1/2} Q^T.
inline Matrix ensrf_transform(const Matrix& v, const Matrix& z_v) {
  detail::require(v.rows() == z_v.rows() && v.cols() == z_v.cols(),
                  "ensrf_transform: V and Z_V shapes differ");
  const Index n = v.cols();
  Matrix m = v.transpose() * z_v;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  if (eig.info() != Eigen::Success) throw NumericalError("ensrf_transform: eigensolver failed");
  Vector lambda = eig.eigenvalues();
  if (n > 0 && lambda.maxCoeff() > 1.0 + 1e-8) throw NumericalError("non-contractive update");
  const Vector root = (1.0 - lambda.array().min(1.0)).sqrt().matrix();
  Matrix t = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (t + t.transpose());
}

/// Pieces of the transform filter built from the SVD of (R^{-1/2} V)^T.
///
/// With R^{-1/2} V = W diag(s) Q^T (thin), for any innovation d
///   beta = Q diag(s / (1 + s^2)) W^T R^{-1/2} d
///   T    = Q (I + diag(s^2))^{-1/2} Q^T,   T T^T = I - V^T (R + V V^T)^{-1} V.
/// Here Q is nens x nens (full), and zero singular values pad s to nens.
struct EntkfFactors {
  Matrix left;        // U_V: nens x nens
  Vector singular;    // length nens, zero padded
  Matrix right;       // V_V: nobs x r, thin
  Vector inv_factor;  // 1 / (1 + s^2), length nens
  Vector r_inv_sqrt;  // R^{-1/2} diagonal
  Matrix transform;   // nens x nens

  Vector weights(const Vector& innovation) const {
    const Index r = right.cols();
    const Vector projected = right.transpose() * r_inv_sqrt.cwiseProduct(innovation);
    Vector scaled = Vector::Zero(left.cols());
    for (Index i = 0; i < r; ++i) scaled[i] = singular[i] * inv_factor[i] * projected[i];
    return left * scaled;
  }
};

inline EntkfFactors entkf_factors(const Matrix& v, const Vector& r_variances) {
  detail::require(v.rows() == r_variances.size(), "entkf_factors: dimension mismatch");
  detail::require((r_variances.array() > 0.0).all(), "entkf_factors: R must be positive");
  const Index n = v.cols();
  EntkfFactors f;
  f.r_inv_sqrt = r_variances.cwiseSqrt().cwiseInverse();
  const Matrix vt = (f.r_inv_sqrt.asDiagonal() * v).transpose();  // nens x nobs
  Eigen::BDCSVD<Matrix> svd(vt, Eigen::ComputeFullU | Eigen::ComputeThinV);
  f.left = svd.matrixU();
  f.right = svd.matrixV();
  f.singular = Vector::Zero(n);
  f.singular.head(svd.singularValues().size()) = svd.singularValues();
  f.inv_factor = (1.0 + f.singular.array().square()).inverse().matrix();
  f.transform = f.left * f.inv_factor.cwiseSqrt().asDiagonal() * f.left.transpose();
  f.transform = 0.5 * (f.transform + f.transform.transpose());
  return f;
}

}  // namespace shrinkda
