#include <gtest/gtest.h>

#include <sstream>

#include "shrinkda/ensemble.hpp"
#include "shrinkda/random.hpp"
#include "shrinkda/testing/oracles.hpp"

using namespace shrinkda;

namespace {

Ensemble two_by_two() {
  Matrix m(2, 2);
  m << 1, 3, 3, 5;
  return Ensemble(m);
}

}  // namespace

TEST(EnsembleMean, IdenticalMembersGiveThatMember) {
  Vector v(3);
  v << 1.5, -2.0, 7.0;
  const Ensemble e = Ensemble::from_members({v, v, v, v});
  EXPECT_EQ(ensemble_mean(e), v);
}

TEST(EnsembleMean, HandArithmetic) {
  const Vector m = ensemble_mean(two_by_two());
  EXPECT_DOUBLE_EQ(m[0], 2.0);
  EXPECT_DOUBLE_EQ(m[1], 4.0);
}

TEST(EnsembleMean, MatchesPerComponentSummation) {
  RngStream rng(11, 0);
  const Matrix x = oracle::random_matrix(10, 6, rng, 3.0);
  const Vector got = ensemble_mean(Ensemble(x));
  for (Index i = 0; i < 10; ++i) {
    double s = 0.0;
    for (Index j = 0; j < 6; ++j) s += x(i, j);
    EXPECT_NEAR(got[i], s / 6.0, 1e-13);
  }
}

TEST(EnsembleMean, EmptyEnsembleThrows) {
  try {
    ensemble_mean(Ensemble());
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty ensemble");
  }
}

TEST(EnsembleMean, SingleMemberAccepted) {
  const Ensemble e(Matrix::Constant(4, 1, 2.0));
  EXPECT_EQ(ensemble_mean(e), Vector::Constant(4, 2.0));
  EXPECT_THROW(deviations(e), Error);
}

TEST(Ensemble, RejectsNonFinite) {
  Matrix m = Matrix::Ones(3, 2);
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(Ensemble{m}, InvalidArgument);
}

TEST(Ensemble, FromMembersRejectsMixedLengths) {
  EXPECT_THROW(Ensemble::from_members({Vector::Ones(3), Vector::Ones(4)}), InvalidArgument);
}

TEST(Deviations, IdenticalMembersGiveZero) {
  const Ensemble e(Matrix::Constant(5, 4, 1.25));
  EXPECT_EQ(deviations(e).columns, Matrix::Zero(5, 4));
}

TEST(Deviations, TwoMembersAnalytic) {
  Matrix m(1, 2);
  m << 0, 2;
  const DeviationMatrix s = deviations(Ensemble(m));
  EXPECT_TRUE(s.scaled);
  EXPECT_DOUBLE_EQ(s.columns(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(s.columns(0, 1), 1.0);
}

TEST(Deviations, OuterProductIsSampleCovariance) {
  RngStream rng(12, 0);
  const Matrix x = oracle::random_matrix(15, 7, rng);
  const Matrix s = deviations(Ensemble(x)).columns;
  const Matrix p = oracle::sample_covariance(x);
  EXPECT_LT((s * s.transpose() - p).norm() / p.norm(), 1e-12);
}

TEST(Deviations, DegenerateEnsembleError) {
  try {
    deviations(Ensemble(Matrix::Ones(3, 1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "degenerate ensemble");
  }
}

TEST(Anomalies, IdenticalMembersGiveZero) {
  const DeviationMatrix u = anomalies(Ensemble(Matrix::Constant(3, 5, -4.0)));
  EXPECT_FALSE(u.scaled);
  EXPECT_EQ(u.columns, Matrix::Zero(3, 5));
}

TEST(Anomalies, ScaledRelation) {
  RngStream rng(13, 0);
  const Ensemble e(oracle::random_matrix(9, 6, rng));
  const Matrix u = anomalies(e).columns, s = deviations(e).columns;
  EXPECT_LT((u - std::sqrt(5.0) * s).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(Anomalies, ColumnsSumToZero) {
  RngStream rng(14, 0);
  const Ensemble e(oracle::random_matrix(12, 8, rng, 10.0));
  const Matrix u = anomalies(e).columns;
  EXPECT_LT(u.rowwise().sum().lpNorm<Eigen::Infinity>() / u.norm(), 1e-12);
}

TEST(DenseSampleCovariance, IdenticalMembersGiveZero) {
  EXPECT_EQ(dense_sample_covariance(Ensemble(Matrix::Constant(4, 3, 2.0))), Matrix::Zero(4, 4));
}

TEST(DenseSampleCovariance, OneDimensional) {
  Matrix m(1, 2);
  m << 0, 2;
  const Matrix p = dense_sample_covariance(Ensemble(m));
  ASSERT_EQ(p.rows(), 1);
  EXPECT_DOUBLE_EQ(p(0, 0), 2.0);
}

TEST(DenseSampleCovariance, ExactlySymmetric) {
  RngStream rng(15, 0);
  const Matrix p = dense_sample_covariance(Ensemble(oracle::random_matrix(30, 9, rng)));
  EXPECT_EQ((p - p.transpose()).norm(), 0.0);
}

TEST(DenseSampleCovariance, OracleCap) {
  try {
    dense_sample_covariance(Ensemble(Matrix::Ones(kDenseOracleCap + 1, 2)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "oracle size exceeded");
  }
}

TEST(EnsembleCsv, RoundTrip) {
  RngStream rng(16, 0);
  const Ensemble e(oracle::random_matrix(4, 3, rng));
  std::stringstream ss;
  write_ensemble_csv(ss, e);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "member,c0,c1,c2,c3");
  const Ensemble back = read_ensemble_csv(ss);
  EXPECT_EQ(back.members(), e.members());
}

TEST(RngStream, ReproducibleAndSplittable) {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  const Vector va = a.normal_vector(100), vb = b.normal_vector(100), vc = c.normal_vector(100);
  EXPECT_EQ(va, vb);
  EXPECT_NE(va, vc);
  EXPECT_EQ(a.position(), 100u);
  EXPECT_EQ(RngStream(42, 7).split(3).normal_vector(5), RngStream(42, 7).split(3).normal_vector(5));
  EXPECT_NE(RngStream(42, 7).split(3).normal_vector(5), RngStream(42, 7).split(4).normal_vector(5));
}

TEST(RngStream, NormalMoments) {
  RngStream rng(5, 0);
  const Vector v = rng.normal_vector(200000);
  const double mean = v.mean();
  const double var = (v.array() - mean).square().sum() / (v.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.01);
}
