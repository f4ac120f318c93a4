#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "shrinkda/models/registry.hpp"
#include "shrinkda/testing/oracles.hpp"

using namespace shrinkda;

namespace {

Vector sample(const QgGrid& g, double (*f)(double, double)) {
  Vector out(g.size());
  for (Index j = 0; j < g.d2; ++j)
    for (Index i = 0; i < g.d1; ++i) out[g.index(i, j)] = f(g.x(i), g.y(j));
  return out;
}

double sinsin(double x, double y) { return std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y); }

Vector random_field(const QgGrid& g, std::uint64_t seed) { return RngStream(seed, 0).normal_vector(g.size()); }

}  // namespace

// ---------------------------------------------------------------------------
// Lorenz-96

TEST(Lorenz96, ForcingIsFixedPoint) {
  EXPECT_EQ(lorenz96_tendency(Vector::Constant(40, 8.0), 8.0), Vector::Zero(40));
}

TEST(Lorenz96, HandArithmetic) {
  Vector x(4);
  x << 1, 2, 3, 4;
  const Vector t = lorenz96_tendency(x, 0.0);
  EXPECT_DOUBLE_EQ(t[0], -5.0);
  // Component 2: (x3 - x0) x1 - x2 = (4 - 1) 2 - 3 = 3.
  EXPECT_DOUBLE_EQ(t[2], 3.0);
}

TEST(Lorenz96, TooShort) { EXPECT_THROW(lorenz96_tendency(Vector::Ones(3), 8.0), InvalidArgument); }

TEST(Lorenz96, StepHalvingConsistency) {
  Vector x0 = Vector::Constant(40, 8.0);
  x0[0] += 0.01;
  x0[7] -= 0.3;
  const Tendency f = [](const Vector& x) { return lorenz96_tendency(x, 8.0); };
  // Against a fine reference, halving dt should cut the error about 16-fold.
  const Vector ref = rk4_integrate(f, x0, 0.000625, 800);
  const double e1 = (rk4_integrate(f, x0, 0.005, 100) - ref).lpNorm<Eigen::Infinity>();
  const double e2 = (rk4_integrate(f, x0, 0.0025, 200) - ref).lpNorm<Eigen::Infinity>();
  EXPECT_NEAR(e1 / e2, 16.0, 2.0);
}

// ---------------------------------------------------------------------------
// Arakawa Jacobian

TEST(Arakawa, SelfJacobianVanishes) {
  const QgGrid g(15, 12);
  const Vector psi = random_field(g, 201);
  // Scaled by the 1 / (dx dy) stencil factor so the bound is on unit-size terms.
  EXPECT_LT(arakawa_jacobian(psi, psi, g).lpNorm<Eigen::Infinity>() * g.dx() * g.dy(), 1e-13);
}

TEST(Arakawa, ConstantVorticityIntegratesToZero) {
  const QgGrid g(17, 17);
  const Vector psi = random_field(g, 202);
  const Vector j = arakawa_jacobian(psi, Vector::Constant(g.size(), 3.0), g);
  EXPECT_LT(std::abs(j.sum()) * g.dx() * g.dy(), 1e-12);
}

TEST(Arakawa, LinearFieldsGiveUnitJacobian) {
  const QgGrid g(21, 21);
  const Vector psi = sample(g, [](double x, double) { return x; });
  const Vector omega = sample(g, [](double, double y) { return y; });
  const Vector j = arakawa_jacobian(psi, omega, g);
  for (Index jj = 2; jj < g.d2 - 2; ++jj)
    for (Index ii = 2; ii < g.d1 - 2; ++ii) EXPECT_NEAR(j[g.index(ii, jj)], 1.0, 1e-10);
}

TEST(Arakawa, MatchesDenseShiftOracle) {
  const QgGrid g(9, 11);
  const oracle::QgOperators ops(g);
  const Vector p = random_field(g, 203), w = random_field(g, 204);
  const Vector ref = ops.jacobian(p, w);
  EXPECT_LT((arakawa_jacobian(p, w, g) - ref).norm() / ref.norm(), 1e-13);
}

TEST(Arakawa, EnergyAndEnstrophyConserved) {
  const QgGrid g(13, 13);
  const Vector p = random_field(g, 205), w = random_field(g, 206);
  const Vector j = arakawa_jacobian(p, w, g);
  const double scale = p.norm() * w.norm() * j.norm();
  EXPECT_LT(std::abs(p.dot(j)) / scale, 1e-12);
  EXPECT_LT(std::abs(w.dot(j)) / scale, 1e-12);
}

TEST(Arakawa, ShapeMismatch) {
  const QgGrid g(5, 5);
  EXPECT_THROW(arakawa_jacobian(Vector::Ones(25), Vector::Ones(24), g), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Poisson

TEST(Poisson, ZeroSource) {
  const QgGrid g(7, 9);
  EXPECT_EQ(poisson_solve(Vector::Zero(g.size()), g), Vector::Zero(g.size()));
}

TEST(Poisson, ExactInverseOfDiscreteLaplacian) {
  const QgGrid g(31, 31);
  const Vector psi = sample(g, sinsin);
  const Vector back = poisson_solve(laplacian(psi, g), g);
  EXPECT_LT((back - psi).lpNorm<Eigen::Infinity>(), 1e-10);
  // Rectangular grid against the dense LU oracle.
  const QgGrid r(8, 13, 1.0, 2.0);
  const Vector w = random_field(r, 207);
  EXPECT_LT((poisson_solve(w, r) - oracle::QgOperators(r).poisson(w)).norm(), 1e-10 * oracle::QgOperators(r).poisson(w).norm());
}

TEST(Poisson, SecondOrderConvergence) {
  std::vector<double> err;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  for (Index d : {31, 63, 127}) {
    const QgGrid g(d, d);
    const Vector exact = sample(g, sinsin);
    const Vector got = poisson_solve(-2.0 * pi2 * exact, g);
    err.push_back((got - exact).lpNorm<Eigen::Infinity>());
  }
  for (std::size_t k = 1; k < err.size(); ++k) EXPECT_NEAR(std::log2(err[k - 1] / err[k]), 2.0, 0.1);
}

TEST(Poisson, Linear) {
  const QgGrid g(15, 10);
  const Vector a = random_field(g, 208), b = random_field(g, 209);
  const Vector lhs = poisson_solve(2.5 * a - 0.5 * b, g);
  const Vector rhs = 2.5 * poisson_solve(a, g) - 0.5 * poisson_solve(b, g);
  EXPECT_LT((lhs - rhs).norm() / rhs.norm(), 1e-10);
}

// ---------------------------------------------------------------------------
// QG tendency

TEST(QgTendency, RestStateWithoutForcing) {
  const QgGrid g(11, 11);
  QgParams p;
  p.tau = 0.0;
  EXPECT_EQ(qg_tendency(Vector::Zero(g.size()), g, p), Vector::Zero(g.size()));
}

TEST(QgTendency, RestStateGivesForcing) {
  const QgGrid g(11, 7);
  QgParams p;
  p.tau = 1.0;
  const Vector t = qg_tendency(Vector::Zero(g.size()), g, p);
  for (Index j = 0; j < g.d2; ++j)
    for (Index i = 0; i < g.d1; ++i)
      EXPECT_EQ(t[g.index(i, j)], std::sin(2.0 * std::numbers::pi * g.y(j) / g.ly));
}

TEST(QgTendency, MatchesDenseOperatorOracle) {
  const QgGrid g(31, 31);
  QgParams p;
  p.r = 1.0;
  p.tau = 1.0;
  p.v = 2e-5;
  const Vector w = random_field(g, 210);
  const oracle::QgOperators ops(g);
  const Vector ref = ops.tendency(w, g, p);
  EXPECT_LT((qg_tendency(w, g, p) - ref).norm() / ref.norm(), 1e-10);
}

TEST(QgModel, ThousandStepsFinite) {
  const ModelDefinition m = make_model("qg-33");
  const Vector x = m.advance(m.initial_state(), 1000);
  EXPECT_TRUE(x.allFinite());
  EXPECT_GT(x.norm(), 0.0);
}

TEST(QgModel, InitialVorticity) {
  EXPECT_DOUBLE_EQ(qg_initial_vorticity_at(0.0, 0.7), 1.0);
  EXPECT_NEAR(qg_initial_vorticity_at(1.0, std::numbers::pi / 8.0), std::sqrt(2.0), 1e-15);
  const QgGrid g(31, 31);
  const Vector w = qg_initial_vorticity(g);
  for (Index j = 0; j < g.d2; ++j)
    for (Index i = 0; i < g.d1; ++i) EXPECT_EQ(w[g.index(i, j)], w[g.index(j, i)]);
}

// ---------------------------------------------------------------------------
// RK4

TEST(Rk4, ZeroTendency) {
  const Vector x = Vector::LinSpaced(5, 0.0, 1.0);
  EXPECT_EQ(rk4_step([](const Vector& v) { return Vector(Vector::Zero(v.size())); }, x, 0.3), x);
}

TEST(Rk4, Exponential) {
  const Vector out = rk4_step([](const Vector& v) { return v; }, Vector::Ones(1), 0.1);
  // One RK4 step on x' = x reproduces the quartic Taylor polynomial.
  const double h = 0.1;
  EXPECT_NEAR(out[0], 1.0 + h + h * h / 2.0 + h * h * h / 6.0 + h * h * h * h / 24.0, 1e-15);
}

TEST(Rk4, FourthOrder) {
  const Tendency f = [](const Vector& v) { return Vector(-v); };
  const double e1 = std::abs(rk4_integrate(f, Vector::Ones(1), 0.1, 10)[0] - std::exp(-1.0));
  const double e2 = std::abs(rk4_integrate(f, Vector::Ones(1), 0.05, 20)[0] - std::exp(-1.0));
  EXPECT_NEAR(e1 / e2, 16.0, 1.0);
}

TEST(Rk4, BlowUp) {
  try {
    rk4_step([](const Vector& v) { return Vector(v.array() * 1e308); }, Vector::Constant(1, 10.0), 1.0);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_STREQ(e.what(), "model blow-up");
  }
  EXPECT_THROW(rk4_step([](const Vector& v) { return v; }, Vector::Ones(1), 0.0), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Registry

TEST(Registry, Keys) {
  EXPECT_EQ(make_model("l96-40").nstate, 40);
  EXPECT_EQ(make_model("qg-33").nstate, 961);
  EXPECT_EQ(make_model("qg-65").nstate, 3969);
  try {
    make_model("qg-x");
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_STREQ(e.what(), "unknown model 'qg-x'");
  }
}

TEST(Registry, StepPreservesLength) {
  const ModelDefinition m = make_model("l96-40");
  EXPECT_EQ(m.step(m.initial_state()).size(), 40);
}
