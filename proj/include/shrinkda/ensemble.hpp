#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace shrinkda {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Immutable set of model states, one column per member.
class Ensemble {
 public:
  Ensemble() = default;

  explicit Ensemble(Matrix members) : members_(std::move(members)) {
    detail::require(members_.size() == 0 || members_.rows() > 0,
                    "ensemble members must have positive length");
    detail::require(members_.allFinite(), "ensemble contains non-finite entries");
  }

  static Ensemble from_members(const std::vector<Vector>& members) {
    if (members.empty()) return Ensemble();
    const Index n = members.front().size();
    Matrix m(n, static_cast<Index>(members.size()));
    for (std::size_t i = 0; i < members.size(); ++i) {
      detail::require(members[i].size() == n, "ensemble members differ in length");
      m.col(static_cast<Index>(i)) = members[i];
    }
    return Ensemble(std::move(m));
  }

  Index nstate() const { return members_.rows(); }
  Index nens() const { return members_.cols(); }
  bool empty() const { return members_.cols() == 0; }

  const Matrix& members() const { return members_; }
  auto member(Index i) const { return members_.col(i); }

 private:
  Matrix members_;
};

/// Member deviations from the ensemble mean, one column per member.
struct DeviationMatrix {
  Matrix columns;
  /// True when the 1/sqrt(nens - 1) factor has been applied.
  bool scaled = true;

  Index nstate() const { return columns.rows(); }
  Index nens() const { return columns.cols(); }
};

inline Vector ensemble_mean(const Ensemble& ens) {
  if (ens.empty()) throw InvalidArgument("empty ensemble");
  return ens.members().rowwise().mean();
}

/// Unscaled anomalies x_i - mean.
inline DeviationMatrix anomalies(const Ensemble& ens) {
  if (ens.nens() < 2) throw InvalidArgument("degenerate ensemble");
  const Vector mean = ensemble_mean(ens);
  return {ens.members().colwise() - mean, false};
}

/// Scaled deviations (x_i - mean) / sqrt(nens - 1); S S^T is the sample covariance.
inline DeviationMatrix deviations(const Ensemble& ens) {
  DeviationMatrix u = anomalies(ens);
  u.columns /= std::sqrt(static_cast<double>(ens.nens() - 1));
  u.scaled = true;
  return u;
}

inline constexpr Index kDenseOracleCap = 500;

/// Explicit sample covariance; meant for tests on small state dimensions.
inline Matrix dense_sample_covariance(const Ensemble& ens, Index cap = kDenseOracleCap) {
  if (ens.nstate() > cap) throw InvalidArgument("oracle size exceeded");
  const DeviationMatrix s = deviations(ens);
  Matrix p = s.columns * s.columns.transpose();
  // exact symmetry
  Matrix sym = 0.5 * (p + p.transpose());
  return sym;
}

// CSV checkpoints: header `member,c0,c1,...`, one row per member.

inline void write_ensemble_csv(std::ostream& os, const Ensemble& ens) {
  os << "member";
  for (Index c = 0; c < ens.nstate(); ++c) os << ",c" << c;
  os << '\n';
  char buf[32];
  for (Index m = 0; m < ens.nens(); ++m) {
    os << m;
    for (Index c = 0; c < ens.nstate(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", ens.members()(c, m));
      os << ',' << buf;
    }
    os << '\n';
  }
}

inline Ensemble read_ensemble_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("member", 0) != 0)
    throw InvalidArgument("ensemble csv: missing header");
  std::vector<Vector> members;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');  // member index
    std::vector<double> values;
    while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
    members.push_back(Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size())));
  }
  return Ensemble::from_members(members);
}

}  // namespace shrinkda
