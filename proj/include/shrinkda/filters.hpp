#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "ensemble.hpp"
#include "linear_solvers.hpp"
#include "observation.hpp"
#include "optimize.hpp"
#include "random.hpp"
#include "sampling.hpp"
#include "shrinkage.hpp"

namespace shrinkda {

/// Per-analysis diagnostics; fields a filter does not produce stay empty.
struct AnalysisDiagnostics {
  std::optional<double> gamma;
  std::optional<double> phi;
  std::optional<double> delta;
  std::optional<double> dual_zeta;
  std::optional<double> cost_primal;
  std::optional<double> cost_dual;
  int solver_iterations = 0;
  Index synthetic_members = 0;
};

/// Analysis ensemble; always holds exactly the real background members.
struct AnalysisResult {
  Ensemble analysis;
  AnalysisDiagnostics diagnostics;
};

struct OptimizerSettings {
  double grad_tol = 1e-8;
  int max_iter = 500;
  double zeta_lower = 1e-8;
  double interval_tol = 1e-10;
};

// Stream layout shared by the stochastic filters, so EnKF, EnKF-FS and EnKF-RS
// consume identical perturbed observations for a given stream.
inline RngStream observation_perturbation_stream(const RngStream& rng) { return rng.split(0); }
inline RngStream synthetic_member_stream(const RngStream& rng) { return rng.split(1); }

/// D = [y^s_i - H x^b_i] with perturbed observations y^s_i ~ N(y, R).
inline Matrix perturbed_innovations(const Ensemble& bg, const Vector& y, const ObservationSpec& obs,
                                    const RngStream& rng) {
  const Matrix ys = perturb_observations(y, obs, bg.nens(), observation_perturbation_stream(rng));
  return ys - obs.observe(bg.members());
}

namespace detail {

inline void check_background(const Ensemble& bg, const Vector& y, const ObservationSpec& obs,
                             Index min_members = 2) {
  if (bg.nens() < min_members) throw InvalidArgument("degenerate ensemble");
  require(bg.nstate() == obs.nstate(), "filter: observation network does not match state length");
  require(y.size() == obs.nobs(), "filter: observation vector length mismatch");
}

inline Ensemble mean_plus_deviations(const Vector& mean, const Matrix& anomalies) {
  return Ensemble(anomalies.colwise() + mean);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stochastic EnKF

/// X^a = X^b + S V^T (R + V V^T)^{-1} D with V = H S.
inline AnalysisResult enkf_update(const Ensemble& bg, const Matrix& innovations,
                                  const ObservationSpec& obs) {
  detail::require(innovations.rows() == obs.nobs() && innovations.cols() == bg.nens(),
                  "enkf: innovation matrix shape mismatch");
  const DeviationMatrix s = deviations(bg);
  const Matrix v = obs.observe(s.columns);
  const Matrix z = solve_observation_space({diagonal_gamma_inverse(obs.variances()), v, innovations});
  AnalysisResult out{Ensemble(bg.members() + s.columns * (v.transpose() * z)), {}};
  out.diagnostics.solver_iterations = static_cast<int>(v.cols());
  return out;
}

inline AnalysisResult enkf_analysis(const Ensemble& bg, const Vector& y, const ObservationSpec& obs,
                                    const RngStream& rng) {
  detail::check_background(bg, y, obs);
  return enkf_update(bg, perturbed_innovations(bg, y, obs, rng), obs);
}

// ---------------------------------------------------------------------------
// Deterministic square-root filters

/// Mean from the ISMF weights, deviations through the symmetric square root.
inline AnalysisResult ensrf_analysis(const Ensemble& bg, const Vector& y, const ObservationSpec& obs) {
  detail::check_background(bg, y, obs);
  const Index n = bg.nens();
  const Vector mean = ensemble_mean(bg);
  const DeviationMatrix s = deviations(bg);
  const Matrix v = obs.observe(s.columns);

  Matrix rhs(obs.nobs(), n + 1);
  rhs.col(0) = y - obs.observe(mean);
  rhs.rightCols(n) = v;
  const Matrix z = solve_observation_space({diagonal_gamma_inverse(obs.variances()), v, rhs});

  const Vector mean_a = mean + s.columns * (v.transpose() * z.col(0));
  const Matrix t = ensrf_transform(v, z.rightCols(n));
  const double scale = std::sqrt(static_cast<double>(n - 1));
  AnalysisResult out{detail::mean_plus_deviations(mean_a, scale * (s.columns * t)), {}};
  out.diagnostics.solver_iterations = static_cast<int>(n);
  return out;
}

inline AnalysisResult entkf_analysis(const Ensemble& bg, const Vector& y, const ObservationSpec& obs) {
  detail::check_background(bg, y, obs);
  const Index n = bg.nens();
  const Vector mean = ensemble_mean(bg);
  const DeviationMatrix s = deviations(bg);
  const Matrix v = obs.observe(s.columns);
  const EntkfFactors f = entkf_factors(v, obs.variances());

  const Vector mean_a = mean + s.columns * f.weights(y - obs.observe(mean));
  const double scale = std::sqrt(static_cast<double>(n - 1));
  return {detail::mean_plus_deviations(mean_a, scale * (s.columns * f.transform)), {}};
}

// ---------------------------------------------------------------------------
// Finite-size filters in ensemble space

/// Quadratic pieces shared by the primal and dual finite-size costs.
///
/// With Y = H U (unscaled anomalies), d = y - H xbar:
///   G = Y^T R^{-1} Y,  b = Y^T R^{-1} d,  c = d^T R^{-1} d,  eps = 1 + 1/n.
struct EnsembleSpaceProblem {
  Matrix gram;
  Vector rhs;
  double misfit = 0.0;
  Index nens = 0;
  Eigen::SelfAdjointEigenSolver<Matrix> gram_eig;

  double epsilon() const { return 1.0 + 1.0 / static_cast<double>(nens); }
  double zeta_upper() const { return static_cast<double>(nens) / epsilon(); }

  /// J(w) = 1/2 ||d - Y w||^2_{R^{-1}} + n/2 log(eps + ||w||^2)
  double primal(const Vector& w) const {
    const double obs_term = misfit - 2.0 * rhs.dot(w) + w.dot(gram * w);
    return 0.5 * obs_term + 0.5 * static_cast<double>(nens) * std::log(epsilon() + w.squaredNorm());
  }

  Vector primal_gradient(const Vector& w) const {
    return gram * w - rhs + (static_cast<double>(nens) / (epsilon() + w.squaredNorm())) * w;
  }

  Matrix primal_hessian(const Vector& w) const {
    const double c = epsilon() + w.squaredNorm();
    const double n = static_cast<double>(nens);
    Matrix h = gram - (2.0 * n / (c * c)) * (w * w.transpose());
    h.diagonal().array() += n / c;
    return h;
  }

  /// D(zeta) = 1/2 [ d^T (R + Y Y^T / zeta)^{-1} d + zeta eps + n log(n / zeta) - n ]
  double dual(double zeta) const {
    const Vector proj = gram_eig.eigenvectors().transpose() * rhs;
    const Vector& lam = gram_eig.eigenvalues();
    double reduction = 0.0;
    for (Index i = 0; i < lam.size(); ++i) reduction += proj[i] * proj[i] / (std::max(lam[i], 0.0) + zeta);
    const double n = static_cast<double>(nens);
    return 0.5 * ((misfit - reduction) + zeta * epsilon() + n * std::log(n / zeta) - n);
  }

  /// Minimiser of the inner quadratic for fixed zeta: (G + zeta I)^{-1} b.
  Vector weights_for_zeta(double zeta) const {
    const Matrix& q = gram_eig.eigenvectors();
    const Vector denom = (gram_eig.eigenvalues().array().max(0.0) + zeta).matrix();
    return q * (q.transpose() * rhs).cwiseQuotient(denom);
  }
};

struct EnsembleSpaceSetup {
  Vector mean;
  DeviationMatrix anomalies;
  EnsembleSpaceProblem problem;
};

inline EnsembleSpaceSetup make_ensemble_space_problem(const Ensemble& bg, const Vector& y,
                                                      const ObservationSpec& obs) {
  detail::check_background(bg, y, obs);
  EnsembleSpaceSetup setup{ensemble_mean(bg), anomalies(bg), {}};
  const Matrix yy = obs.observe(setup.anomalies.columns);
  const Vector rinv = obs.variances().cwiseInverse();
  const Vector d = y - obs.observe(setup.mean);
  auto& p = setup.problem;
  p.nens = bg.nens();
  p.gram = yy.transpose() * rinv.asDiagonal() * yy;
  p.gram = 0.5 * (p.gram + p.gram.transpose());
  p.rhs = yy.transpose() * rinv.cwiseProduct(d);
  p.misfit = d.dot(rinv.cwiseProduct(d));
  p.gram_eig.compute(p.gram);
  return setup;
}

namespace detail {

inline std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

/// U [ (n - 1) A^{-1} ]^{1/2} for symmetric positive definite A.
inline Matrix inverse_sqrt_transform(const Matrix& u, const Matrix& a, Index nens) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0))
    throw NumericalError("ensemble-space Hessian is not positive definite");
  const Vector root = (static_cast<double>(nens - 1) / eig.eigenvalues().array()).sqrt().matrix();
  return u * (eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose());
}

}  // namespace detail

/// Finite-size EnKF: minimise J(w) from w = 0 by BFGS, polish with Newton steps.
inline AnalysisResult enkf_n_analysis(const Ensemble& bg, const Vector& y, const ObservationSpec& obs,
                                      const OptimizerSettings& opt = {}) {
  const EnsembleSpaceSetup setup = make_ensemble_space_problem(bg, y, obs);
  const EnsembleSpaceProblem& p = setup.problem;
  GradientObjective objective = [&p](const Vector& w, Vector& g) {
    g = p.primal_gradient(w);
    return p.primal(w);
  };
  VectorMinimum m = minimize_bfgs(objective, Vector::Zero(p.nens), opt.grad_tol, opt.max_iter);
  for (int polish = 0; polish < 5 && !m.converged; ++polish) {
    const Vector g = p.primal_gradient(m.x);
    Eigen::LDLT<Matrix> ldlt(p.primal_hessian(m.x));
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Vector step = ldlt.solve(g);
    const Vector next = m.x - step;
    // Near the optimum J is flat to rounding, so judge the step by the gradient.
    const double gn = p.primal_gradient(next).norm();
    if (!(gn < m.grad_norm)) break;
    m.x = next;
    m.fx = p.primal(next);
    m.grad_norm = gn;
    m.converged = m.grad_norm < opt.grad_tol;
    ++m.iterations;
  }
  if (!m.converged)
    throw NumericalError("enkf-n: optimizer did not converge (gradient norm " +
                         detail::format_sci(m.grad_norm) + " after " + std::to_string(m.iterations) +
                         " iterations)");

  const Matrix& u = setup.anomalies.columns;
  const Vector mean_a = setup.mean + u * m.x;
  const Matrix dev = detail::inverse_sqrt_transform(u, p.primal_hessian(m.x), p.nens);
  AnalysisResult out{detail::mean_plus_deviations(mean_a, dev), {}};
  const double zeta = static_cast<double>(p.nens) / (p.epsilon() + m.x.squaredNorm());
  out.diagnostics.cost_primal = m.fx;
  out.diagnostics.dual_zeta = zeta;
  out.diagnostics.cost_dual = p.dual(zeta);
  out.diagnostics.solver_iterations = m.iterations;
  return out;
}

/// Dual finite-size EnKF: one-dimensional bounded search for zeta.
inline AnalysisResult enkf_du_analysis(const Ensemble& bg, const Vector& y, const ObservationSpec& obs,
                                       const OptimizerSettings& opt = {}) {
  const EnsembleSpaceSetup setup = make_ensemble_space_problem(bg, y, obs);
  const EnsembleSpaceProblem& p = setup.problem;
  const double lower = opt.zeta_lower;
  const double upper = p.zeta_upper();
  const ScalarMinimum m = minimize_bounded([&p](double z) { return p.dual(z); }, lower, upper,
                                           opt.interval_tol, opt.max_iter);
  if (!m.converged || !std::isfinite(m.fx))
    throw NumericalError("enkf-du: bounded search failed on [" + std::to_string(m.lower) + ", " +
                         std::to_string(m.upper) + "]");

  const double zeta = m.x;
  const Vector w = p.weights_for_zeta(zeta);
  const Matrix& u = setup.anomalies.columns;
  Matrix a = p.gram;
  a.diagonal().array() += zeta;
  AnalysisResult out{detail::mean_plus_deviations(setup.mean + u * w,
                                                  detail::inverse_sqrt_transform(u, a, p.nens)),
                     {}};
  out.diagnostics.dual_zeta = zeta;
  out.diagnostics.cost_dual = m.fx;
  out.diagnostics.cost_primal = p.primal(w);
  out.diagnostics.solver_iterations = m.iterations;
  return out;
}

// ---------------------------------------------------------------------------
// Shrinkage-based filters

/// Extended deviations about the real mean, scaled by 1/sqrt(N_k - 1).
inline Matrix extended_scaled_deviations(const ExtendedEnsemble& ext) {
  detail::require(ext.nk() >= 2, "extended ensemble needs at least two members");
  return ext.anomalies_about_real_mean() / std::sqrt(static_cast<double>(ext.nk() - 1));
}

namespace detail {

inline void fill_shrinkage_diagnostics(AnalysisDiagnostics& d, const ShrinkageCovariance& cov,
                                       Index k) {
  d.gamma = cov.gamma;
  d.phi = cov.phi;
  d.delta = cov.delta;
  d.synthetic_members = k;
}

}  // namespace detail

/// Full-space update with the shrinkage covariance over the extended ensemble.
///
///   E = sqrt(delta) S~,  Pi = H E,  Gamma = R + phi H H^T (diagonal for selection H)
///   (Gamma + Pi Pi^T) Z = D,  X^a = X^b + E Pi^T Z + phi H^T Z
///
/// Only the real members are updated; `synthetic` is used for the
/// covariance and then dropped.
inline AnalysisResult enkf_fs_update(const Ensemble& bg, const Matrix& innovations,
                                     const ObservationSpec& obs, const ShrinkageCovariance& cov,
                                     const Matrix& synthetic) {
  detail::require(innovations.rows() == obs.nobs() && innovations.cols() == bg.nens(),
                  "enkf-fs: innovation matrix shape mismatch");
  const ExtendedEnsemble ext = extend_ensemble(bg, synthetic);
  const Vector gamma_diag = (obs.variances().array() + cov.phi).matrix();

  Matrix e(bg.nstate(), 0), pi(obs.nobs(), 0);
  if (cov.delta > 0.0) {
    e = std::sqrt(cov.delta) * extended_scaled_deviations(ext);
    pi = obs.observe(e);
  }
  const Matrix z = solve_observation_space({diagonal_gamma_inverse(gamma_diag), pi, innovations});
  Matrix xa = bg.members();
  if (e.cols() > 0) xa.noalias() += e * (pi.transpose() * z);
  if (cov.phi != 0.0) xa += cov.phi * obs.adjoint(z);

  AnalysisResult out{Ensemble(std::move(xa)), {}};
  detail::fill_shrinkage_diagnostics(out.diagnostics, cov, synthetic.cols());
  out.diagnostics.solver_iterations = static_cast<int>(pi.cols());
  return out;
}

inline AnalysisResult enkf_fs_analysis(const Ensemble& bg, const Vector& y, const ObservationSpec& obs,
                                       Index k, const RngStream& rng) {
  detail::check_background(bg, y, obs, 3);
  const ShrinkageCovariance cov = estimate_rblw_covariance(bg);
  const Matrix d = perturbed_innovations(bg, y, obs, rng);
  const Matrix syn = draw_synthetic_members(ensemble_mean(bg), cov, k, synthetic_member_stream(rng));
  return enkf_fs_update(bg, d, obs, cov, syn);
}

/// B^{-1} M for B = phi I + delta S S^T by the Woodbury identity:
///   B^{-1} = (I - S ((phi/delta) I + S^T S)^{-1} S^T) / phi.
inline Matrix shrinkage_inverse_apply(double phi, double delta, const Matrix& s, const Matrix& m) {
  if (!(phi > 0.0)) throw NumericalError("rank-deficient ensemble space (phi = 0, condition inf)");
  if (delta == 0.0 || s.cols() == 0) return m / phi;
  Matrix inner = s.transpose() * s;
  inner.diagonal().array() += phi / delta;
  Eigen::LLT<Matrix> llt(inner);
  if (llt.info() != Eigen::Success) throw NumericalError("shrinkage inverse: inner system not SPD");
  return (m - s * llt.solve(s.transpose() * m)) / phi;
}

/// Eigenvalues below this fraction of the largest are null directions of U~.
inline constexpr double kEnsembleSpaceRankTolerance = 1e-10;

struct ReducedSpaceSolution {
  Matrix weights;  // lambda*: N_k x nens
  Index rank;
  double condition;
};

/// lambda* = [U~^T B^{-1} U~ + Q~^T R^{-1} Q~]^+ Q~^T R^{-1} D.
///
/// The matrix is singular whenever U~ has a null space (the real anomalies
/// always sum to zero); the minimum-norm solution gives the unique U~ lambda*.
inline ReducedSpaceSolution solve_reduced_space(const Matrix& u_ext, const Matrix& z_bu,
                                                const Matrix& q, const Vector& r_variances,
                                                const Matrix& innovations) {
  const Vector rinv = r_variances.cwiseInverse();
  Matrix a = u_ext.transpose() * z_bu + q.transpose() * rinv.asDiagonal() * q;
  a = 0.5 * (a + a.transpose());
  const Matrix rhs = q.transpose() * (rinv.asDiagonal() * innovations);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  if (eig.info() != Eigen::Success) throw NumericalError("rank-deficient ensemble space (eigensolver failed)");
  const Vector& lam = eig.eigenvalues();
  const double lmax = lam.size() ? lam.maxCoeff() : 0.0;
  if (!(lmax > 0.0) || !std::isfinite(lmax))
    throw NumericalError("rank-deficient ensemble space (condition inf)");
  Vector inv = Vector::Zero(lam.size());
  Index rank = 0;
  double lmin = lmax;
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam[i] > kEnsembleSpaceRankTolerance * lmax) {
      inv[i] = 1.0 / lam[i];
      lmin = std::min(lmin, lam[i]);
      ++rank;
    }
  }
  const Matrix& v = eig.eigenvectors();
  return {v * inv.asDiagonal() * (v.transpose() * rhs), rank, lmax / lmin};
}

/// Ensemble-space 3D-Var over the extended basis U~ with the same shrinkage
/// covariance as the full-space update (phi I + delta S~ S~^T).
inline AnalysisResult enkf_rs_update(const Ensemble& bg, const Matrix& innovations,
                                     const ObservationSpec& obs, const ShrinkageCovariance& cov,
                                     const Matrix& synthetic) {
  detail::require(innovations.rows() == obs.nobs() && innovations.cols() == bg.nens(),
                  "enkf-rs: innovation matrix shape mismatch");
  const ExtendedEnsemble ext = extend_ensemble(bg, synthetic);
  const Matrix u_ext = ext.anomalies_about_real_mean();
  const Matrix s_ext = u_ext / std::sqrt(static_cast<double>(ext.nk() - 1));
  const Matrix z_bu = shrinkage_inverse_apply(cov.phi, cov.delta, s_ext, u_ext);
  const Matrix q = obs.observe(u_ext);
  const ReducedSpaceSolution sol = solve_reduced_space(u_ext, z_bu, q, obs.variances(), innovations);

  AnalysisResult out{Ensemble(bg.members() + u_ext * sol.weights), {}};
  detail::fill_shrinkage_diagnostics(out.diagnostics, cov, synthetic.cols());
  out.diagnostics.solver_iterations = static_cast<int>(sol.rank);
  return out;
}

inline AnalysisResult enkf_rs_analysis(const Ensemble& bg, const Vector& y, const ObservationSpec& obs,
                                       Index k, const RngStream& rng) {
  detail::check_background(bg, y, obs, 3);
  const ShrinkageCovariance cov = estimate_rblw_covariance(bg);
  const Matrix d = perturbed_innovations(bg, y, obs, rng);
  const Matrix syn = draw_synthetic_members(ensemble_mean(bg), cov, k, synthetic_member_stream(rng));
  return enkf_rs_update(bg, d, obs, cov, syn);
}

// ---------------------------------------------------------------------------
// Localization (dense, diagnostic scale)

/// P o rho with rho_ij = exp(-d(i,j)^2 / (2 L^2)).
inline Matrix localize_covariance(const Matrix& p, const std::function<double(Index, Index)>& distance,
                                  double radius) {
  detail::require(p.rows() == p.cols(), "localize_covariance: matrix must be square");
  detail::require(radius > 0.0, "localize_covariance: radius must be positive");
  Matrix out = p;
  const double inv = 1.0 / (2.0 * radius * radius);
  for (Index j = 0; j < p.cols(); ++j)
    for (Index i = 0; i < p.rows(); ++i) {
      if (i == j) continue;
      const double d = distance(i, j);
      out(i, j) *= std::exp(-d * d * inv);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Selection by key

enum class FilterKind { EnKF, EnSRF, EnTKF, EnKFN, EnKFDU, EnKFFS, EnKFRS };

inline constexpr FilterKind kAllFilters[] = {FilterKind::EnKF,   FilterKind::EnSRF,  FilterKind::EnTKF,
                                             FilterKind::EnKFN,  FilterKind::EnKFDU, FilterKind::EnKFFS,
                                             FilterKind::EnKFRS};

inline std::string_view filter_key(FilterKind k) {
  switch (k) {
    case FilterKind::EnKF: return "enkf";
    case FilterKind::EnSRF: return "ensrf";
    case FilterKind::EnTKF: return "entkf";
    case FilterKind::EnKFN: return "enkf-n";
    case FilterKind::EnKFDU: return "enkf-du";
    case FilterKind::EnKFFS: return "enkf-fs";
    case FilterKind::EnKFRS: return "enkf-rs";
  }
  return "?";
}

inline FilterKind parse_filter_kind(std::string_view key) {
  for (FilterKind k : kAllFilters)
    if (filter_key(k) == key) return k;
  throw InvalidArgument("unknown filter '" + std::string(key) + "'");
}

inline bool uses_synthetic_members(FilterKind k) {
  return k == FilterKind::EnKFFS || k == FilterKind::EnKFRS;
}

inline Index minimum_members(FilterKind k) { return uses_synthetic_members(k) ? 3 : 2; }

struct FilterSettings {
  Index synthetic_members = 0;
  OptimizerSettings optimizer;
};

inline AnalysisResult analyze(FilterKind kind, const Ensemble& bg, const Vector& y,
                              const ObservationSpec& obs, const FilterSettings& settings,
                              const RngStream& rng) {
  switch (kind) {
    case FilterKind::EnKF: return enkf_analysis(bg, y, obs, rng);
    case FilterKind::EnSRF: return ensrf_analysis(bg, y, obs);
    case FilterKind::EnTKF: return entkf_analysis(bg, y, obs);
    case FilterKind::EnKFN: return enkf_n_analysis(bg, y, obs, settings.optimizer);
    case FilterKind::EnKFDU: return enkf_du_analysis(bg, y, obs, settings.optimizer);
    case FilterKind::EnKFFS: return enkf_fs_analysis(bg, y, obs, settings.synthetic_members, rng);
    case FilterKind::EnKFRS: return enkf_rs_analysis(bg, y, obs, settings.synthetic_members, rng);
  }
  throw InvalidArgument("unknown filter");
}

}  // namespace shrinkda
