#pragma once

#include <cmath>
#include <vector>

#include "ensemble.hpp"

namespace shrinkda {

/// Observation network: H selects `indices` from the state, R = diag(variances).
class ObservationSpec {
 public:
  ObservationSpec(Index nstate, std::vector<Index> indices, Vector variances)
      : nstate_(nstate), indices_(std::move(indices)), variances_(std::move(variances)) {
    detail::require(nstate_ > 0, "observation: nstate must be positive");
    detail::require(static_cast<Index>(indices_.size()) == variances_.size(),
                    "observation: one variance per observed index");
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      detail::require(indices_[k] >= 0 && indices_[k] < nstate_, "observation: index out of range");
      detail::require(k == 0 || indices_[k] > indices_[k - 1],
                      "observation: indices must be strictly increasing");
    }
    detail::require((variances_.array() > 0.0).all(), "observation: variances must be positive");
  }

  /// round(p * nstate) components spaced evenly by stride nstate / nobs.
  static ObservationSpec evenly_spaced(Index nstate, double p, double obs_std) {
    detail::require(p > 0.0 && p <= 1.0, "observation: fraction must lie in (0, 1]");
    detail::require(obs_std > 0.0, "observation: std must be positive");
    const Index nobs = std::max<Index>(1, static_cast<Index>(std::llround(p * static_cast<double>(nstate))));
    std::vector<Index> idx(static_cast<std::size_t>(nobs));
    for (Index k = 0; k < nobs; ++k)
      idx[static_cast<std::size_t>(k)] = (k * nstate) / nobs;
    return ObservationSpec(nstate, std::move(idx), Vector::Constant(nobs, obs_std * obs_std));
  }

  Index nstate() const { return nstate_; }
  Index nobs() const { return static_cast<Index>(indices_.size()); }
  const std::vector<Index>& indices() const { return indices_; }
  const Vector& variances() const { return variances_; }

  /// H x for every column of x.
  Matrix observe(const Matrix& x) const {
    detail::require(x.rows() == nstate_, "observation: state length mismatch");
    Matrix out(nobs(), x.cols());
    for (Index k = 0; k < nobs(); ++k) out.row(k) = x.row(indices_[static_cast<std::size_t>(k)]);
    return out;
  }

  Vector observe(const Vector& x) const {
    return observe(Matrix(x)).col(0);
  }

  /// H^T z: scatter observation-space columns into state space.
  Matrix adjoint(const Matrix& z) const {
    detail::require(z.rows() == nobs(), "observation: obs length mismatch");
    Matrix out = Matrix::Zero(nstate_, z.cols());
    for (Index k = 0; k < nobs(); ++k) out.row(indices_[static_cast<std::size_t>(k)]) = z.row(k);
    return out;
  }

  /// Explicit H, for oracles.
  Matrix dense_operator() const {
    Matrix h = Matrix::Zero(nobs(), nstate_);
    for (Index k = 0; k < nobs(); ++k) h(k, indices_[static_cast<std::size_t>(k)]) = 1.0;
    return h;
  }

 private:
  Index nstate_;
  std::vector<Index> indices_;
  Vector variances_;
};

}  // namespace shrinkda
