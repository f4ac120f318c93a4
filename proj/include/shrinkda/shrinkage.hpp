#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ensemble.hpp"

namespace shrinkda {

/// Shrinkage estimate B = phi I + delta S S^T kept in factored form.
///
/// Invariants: gamma in [0, 1], delta = 1 - gamma, phi = mu * gamma.
struct ShrinkageCovariance {
  double phi = 0.0;
  double delta = 1.0;
  double mu = 0.0;
  double gamma = 0.0;
  DeviationMatrix deviations;

  Index nstate() const { return deviations.nstate(); }

  /// Explicit matrix; only for small oracle-scale problems.
  Matrix dense() const {
    Matrix b = delta * deviations.columns * deviations.columns.transpose();
    b.diagonal().array() += phi;
    return 0.5 * (b + b.transpose());
  }
};

struct RblwParameters {
  double mu;
  double gamma;
  double phi;
  double delta;
};

/// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kSingularRankTolerance = 1e-12;

/// Singular values of S in nonincreasing order.
inline Vector deviation_singular_values(const DeviationMatrix& s) {
  if (s.columns.size() == 0 || s.columns.cwiseAbs().maxCoeff() == 0.0)
    throw InvalidArgument("zero deviations");
  Eigen::BDCSVD<Matrix> svd(s.columns);
  return svd.singularValues();
}

/// RBLW coefficients from the singular values of the scaled deviations.
///
///   tr(P)   = sum sigma^2,   tr(P^2) = sum sigma^4
///   gamma   = min( ((n-2)/N tr(P^2) + tr(P)^2) / ((n+2)(tr(P^2) - tr(P)^2/N)), 1 )
///
/// with n members and state dimension N; P is never formed.
inline RblwParameters rblw_parameters(const Vector& singular_values, Index nstate, Index nens) {
  if (nens < 3) throw InvalidArgument("too few members for RBLW");
  detail::require(nstate > 0, "rblw: nstate must be positive");
  const double smax = singular_values.size() ? singular_values.cwiseAbs().maxCoeff() : 0.0;
  if (!(smax > 0.0)) throw InvalidArgument("zero deviations");

  double tr1 = 0.0, tr2 = 0.0;
  for (double s : singular_values) {
    if (std::abs(s) <= kSingularRankTolerance * smax) continue;
    const double s2 = s * s;
    tr1 += s2;
    tr2 += s2 * s2;
  }
  const double n = static_cast<double>(nens);
  const double dim = static_cast<double>(nstate);
  const double numerator = (n - 2.0) / dim * tr2 + tr1 * tr1;
  const double denominator = (n + 2.0) * (tr2 - tr1 * tr1 / dim);

  RblwParameters p{};
  p.mu = tr1 / dim;
  p.gamma = denominator > 0.0 ? std::min(numerator / denominator, 1.0) : 1.0;
  p.phi = p.mu * p.gamma;
  p.delta = 1.0 - p.gamma;
  return p;
}

inline ShrinkageCovariance make_shrinkage_covariance(DeviationMatrix s, const RblwParameters& p) {
  detail::require(s.scaled, "shrinkage covariance needs scaled deviations");
  ShrinkageCovariance cov;
  cov.phi = p.phi;
  cov.delta = p.delta;
  cov.mu = p.mu;
  cov.gamma = p.gamma;
  cov.deviations = std::move(s);
  return cov;
}

/// RBLW shrinkage estimate of the background covariance of an ensemble.
inline ShrinkageCovariance estimate_rblw_covariance(const Ensemble& ens) {
  DeviationMatrix s = deviations(ens);
  const RblwParameters p = rblw_parameters(deviation_singular_values(s), ens.nstate(), ens.nens());
  return make_shrinkage_covariance(std::move(s), p);
}

/// phi M + delta S (S^T M), without forming B.
inline Matrix apply_shrunk_covariance(const ShrinkageCovariance& cov, const Matrix& m) {
  if (m.rows() != cov.nstate())
    throw InvalidArgument("apply_shrunk_covariance: dimension mismatch");
  Matrix out = cov.phi * m;
  if (cov.delta != 0.0) {
    const Matrix& s = cov.deviations.columns;
    out.noalias() += cov.delta * (s * (s.transpose() * m));
  }
  return out;
}

namespace detail {

struct SampleTraces {
  double tr1;  // tr(C)
  double tr2;  // tr(C^2)
  Matrix gram;  // s_i . s_j
  double divisor;  // n - 1
};

inline SampleTraces sample_traces(const Matrix& samples) {
  require(samples.cols() >= 2, "shrinkage: at least two samples required");
  SampleTraces t;
  t.gram = samples.transpose() * samples;
  t.divisor = static_cast<double>(samples.cols() - 1);
  t.tr1 = t.gram.trace() / t.divisor;
  t.tr2 = t.gram.squaredNorm() / (t.divisor * t.divisor);
  return t;
}

}  // namespace detail

/// Ledoit-Wolf coefficient for explicit centered samples (one per column).
///
/// Uses the Gram matrix G = S^T S, so C_s is never formed:
///   ||C - s_i s_i^T||_F^2 = ||C||_F^2 - 2 s_i^T C s_i + ||s_i||^4.
inline double lw_gamma(const Matrix& samples, Index nstate) {
  detail::require(samples.rows() == nstate, "lw_gamma: sample length differs from nstate");
  const auto t = detail::sample_traces(samples);
  if (t.tr1 <= 0.0) throw InvalidArgument("zero covariance");
  const double n = static_cast<double>(samples.cols());
  const double dim = static_cast<double>(nstate);

  double numerator = 0.0;
  for (Index i = 0; i < samples.cols(); ++i) {
    const double quad = t.gram.col(i).squaredNorm() / t.divisor;
    const double norm2 = t.gram(i, i);
    numerator += t.tr2 - 2.0 * quad + norm2 * norm2;
  }
  const double denominator = n * n * (t.tr2 - t.tr1 * t.tr1 / dim);
  if (!(denominator > 0.0)) return 1.0;
  return std::clamp(numerator / denominator, 0.0, 1.0);
}

/// One application of the OAS fixed-point map given tr(C) and tr(C^2).
///
/// tr(C_j C) = gamma tr(C)^2 / N + (1 - gamma) tr(C^2) and tr(C_j) = tr(C).
inline double oas_step(double gamma, double tr1, double tr2, Index nsamples, Index nstate) {
  const double n = static_cast<double>(nsamples);
  const double dim = static_cast<double>(nstate);
  const double tr_cc = gamma * tr1 * tr1 / dim + (1.0 - gamma) * tr2;
  const double tr_c2 = tr1 * tr1;
  const double numerator = (1.0 - 2.0 / dim) * tr_cc + tr_c2;
  const double denominator = (n + 1.0 - 2.0 / dim) * tr_cc + (1.0 - n / dim) * tr_c2;
  if (!(denominator > 0.0)) return 1.0;
  return std::clamp(numerator / denominator, 0.0, 1.0);
}

struct OasResult {
  double gamma;
  bool converged;
  int iterations;
};

struct OasOptions {
  std::optional<double> init;  // unset: RBLW gamma of the samples, or 1 below three samples
  int max_iter = 100;
  double tol = 1e-10;
};

/// Oracle-approximating shrinkage by fixed-point iteration.
///
/// Non-convergence is not an error: the last iterate is returned with
/// `converged = false`.
inline OasResult oas_gamma(const Matrix& samples, Index nstate, const OasOptions& opt = {}) {
  detail::require(samples.rows() == nstate, "oas_gamma: sample length differs from nstate");
  detail::require(!opt.init || (*opt.init >= 0.0 && *opt.init <= 1.0), "oas_gamma: init must lie in [0, 1]");
  const auto t = detail::sample_traces(samples);
  if (t.tr1 <= 0.0) throw InvalidArgument("zero covariance");

  double gamma = 1.0;
  if (opt.init) {
    gamma = *opt.init;
  } else if (samples.cols() >= 3) {
    const Vector sv = Eigen::BDCSVD<Matrix>(samples / std::sqrt(t.divisor)).singularValues();
    gamma = rblw_parameters(sv, nstate, samples.cols()).gamma;
  }
  for (int it = 1; it <= opt.max_iter; ++it) {
    const double next = oas_step(gamma, t.tr1, t.tr2, samples.cols(), nstate);
    const double change = std::abs(next - gamma);
    gamma = next;
    if (change < opt.tol) return {gamma, true, it};
  }
  return {gamma, false, opt.max_iter};
}

}  // namespace shrinkda
