#pragma once

#include <cmath>

#include "observation.hpp"
#include "random.hpp"
#include "shrinkage.hpp"

namespace shrinkda {

/// K draws from N(mean, phi I + delta S S^T), one column per draw.
///
/// Draw i uses child stream i of `rng`:
///   x_i = mean + sqrt(phi) e1 + sqrt(delta) S e2,  e1 ~ N(0, I_N), e2 ~ N(0, I_n).
inline Matrix draw_synthetic_members(const Vector& mean, const ShrinkageCovariance& cov, Index k,
                                     const RngStream& rng) {
  if (!(cov.phi >= 0.0) || !(cov.delta >= 0.0))
    throw InvalidArgument("invalid shrinkage parameters");
  detail::require(k >= 0, "synthetic member count must be nonnegative");
  detail::require(mean.size() == cov.nstate(), "synthetic members: mean length mismatch");

  const Matrix& s = cov.deviations.columns;
  const double sphi = std::sqrt(cov.phi);
  const double sdelta = std::sqrt(cov.delta);
  Matrix out(mean.size(), k);
  for (Index i = 0; i < k; ++i) {
    RngStream stream = rng.split(static_cast<std::uint64_t>(i));
    const Vector e1 = stream.normal_vector(mean.size());
    const Vector e2 = stream.normal_vector(s.cols());
    out.col(i) = mean + sphi * e1 + sdelta * (s * e2);
  }
  return out;
}

/// Real members followed by synthetic ones.
struct ExtendedEnsemble {
  Ensemble real;
  Matrix synthetic;

  Index nstate() const { return real.nstate(); }
  Index nk() const { return real.nens() + synthetic.cols(); }

  Matrix members() const {
    Matrix all(nstate(), nk());
    all.leftCols(real.nens()) = real.members();
    all.rightCols(synthetic.cols()) = synthetic;
    return all;
  }

  /// Columns minus the mean of the REAL members.
  Matrix anomalies_about_real_mean() const {
    return members().colwise() - ensemble_mean(real);
  }
};

inline ExtendedEnsemble extend_ensemble(const Ensemble& real, const Matrix& synthetic) {
  if (synthetic.cols() > 0 && synthetic.rows() != real.nstate())
    throw InvalidArgument("extend_ensemble: dimension mismatch");
  ExtendedEnsemble ext{real, synthetic.cols() > 0 ? synthetic : Matrix(real.nstate(), 0)};
  return ext;
}

/// y + R^{1/2} eta_i for i < n with R = diag(variances); column i uses child stream i.
inline Matrix perturb_observations(const Vector& y, const Vector& variances, Index n,
                                   const RngStream& rng) {
  detail::require(n >= 1, "perturb_observations: need at least one sample");
  if (y.size() != variances.size()) throw InvalidArgument("perturb_observations: dimension mismatch");
  detail::require((variances.array() >= 0.0).all(), "perturb_observations: negative variance");
  const Vector sd = variances.cwiseSqrt();
  Matrix out(y.size(), n);
  for (Index i = 0; i < n; ++i) {
    RngStream stream = rng.split(static_cast<std::uint64_t>(i));
    out.col(i) = y + sd.cwiseProduct(stream.normal_vector(y.size()));
  }
  return out;
}

inline Matrix perturb_observations(const Vector& y, const ObservationSpec& obs, Index n,
                                   const RngStream& rng) {
  return perturb_observations(y, obs.variances(), n, rng);
}

}  // namespace shrinkda
