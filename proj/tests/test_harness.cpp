#include <gtest/gtest.h>

#include <sstream>

#include "shrinkda/harness/experiment.hpp"
#include "shrinkda/harness/output.hpp"

using namespace shrinkda;

namespace {

ExperimentConfig tiny_l96(const std::string& filter = "ensrf") {
  ExperimentConfig c;
  c.model = "l96-5";
  c.filter = filter;
  c.nens = 8;
  c.p = 1.0;
  c.obs_std = 0.01;
  c.sigma_b = 0.15;
  c.n_cycles = 10;
  c.steps_per_cycle = 2;
  c.spinup_steps = 200;
  c.timing = false;
  c.threads = 1;
  return c;
}

std::string csv_of(const ExperimentConfig& c) {
  std::ostringstream out;
  write_cycle_csv(out, run_twin_experiment(c), c.timing);
  return out.str();
}

}  // namespace

TEST(Rmse, EqualSeriesZero) {
  const std::vector<Vector> a{Vector::Ones(3), Vector::Zero(3)};
  EXPECT_EQ(rmse(a, a), 0.0);
}

TEST(Rmse, HandArithmetic) {
  Vector d(2);
  d << 3, 4;
  EXPECT_DOUBLE_EQ(rmse({d}, {Vector::Zero(2)}), 5.0);
}

TEST(Rmse, MatchesSummation) {
  RngStream rng(301, 0);
  std::vector<Vector> a, t;
  double sum = 0.0;
  for (int i = 0; i < 20; ++i) {
    a.push_back(rng.normal_vector(7));
    t.push_back(rng.normal_vector(7));
    for (Index k = 0; k < 7; ++k) sum += (a.back()[k] - t.back()[k]) * (a.back()[k] - t.back()[k]);
  }
  EXPECT_NEAR(rmse(a, t), std::sqrt(sum / 20.0), 1e-12);
}

TEST(Rmse, LengthMismatch) {
  EXPECT_THROW(rmse({Vector::Ones(2)}, {Vector::Ones(2), Vector::Ones(2)}), InvalidArgument);
}

TEST(InitialEnsemble, VanishingSpread) {
  const Vector t = Vector::LinSpaced(6, -2.0, 3.0);
  const Ensemble e = make_initial_ensemble(t, 1e-14, 4, RngStream(1, 0));
  for (Index i = 0; i < 4; ++i) EXPECT_LT((e.member(i) - t).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(InitialEnsemble, ProportionalSpread) {
  const Vector t = Vector::LinSpaced(4, 0.5, 2.0);
  const Ensemble e = make_initial_ensemble(t, 0.05, 100000, RngStream(2, 0));
  const Matrix& m = e.members();
  for (Index k = 0; k < 4; ++k) {
    const double mean = m.row(k).mean();
    const double sd = std::sqrt((m.row(k).array() - mean).square().sum() / (m.cols() - 1));
    EXPECT_NEAR(sd, 0.05 * t[k], 0.02 * 0.05 * t[k]);
  }
}

TEST(InitialEnsemble, Deterministic) {
  const Vector t = Vector::Ones(5);
  EXPECT_EQ(make_initial_ensemble(t, 0.1, 6, RngStream(3, 0)).members(),
            make_initial_ensemble(t, 0.1, 6, RngStream(3, 0)).members());
}

TEST(TwinExperiment, EnsrfConvergesOnTinyLorenz) {
  const ExperimentResult r = run_twin_experiment(tiny_l96());
  ASSERT_EQ(r.cycles.size(), 10u);
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 5; ++i) early += r.cycles[static_cast<std::size_t>(i)].rmse;
  for (int i = 5; i < 10; ++i) late += r.cycles[static_cast<std::size_t>(i)].rmse;
  EXPECT_LT(late, early);
  EXPECT_LT(r.cycles.back().rmse, r.cycles.front().rmse);
}

TEST(TwinExperiment, ByteIdenticalCsv) {
  ExperimentConfig c = tiny_l96("enkf-fs");
  c.synthetic_ratio = 2.0;
  const std::string a = csv_of(c), b = csv_of(c);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, a.find('\n')), kCycleCsvHeader);
  c.rng_seed = 2;
  EXPECT_NE(csv_of(c), a);
}

TEST(TwinExperiment, ThreadCountDoesNotChangeResults) {
  ExperimentConfig c = tiny_l96("enkf");
  const std::string one = csv_of(c);
  c.threads = 3;
  EXPECT_EQ(csv_of(c), one);
}

TEST(TwinExperiment, SeriesLengthAndFinite) {
  for (FilterKind k : kAllFilters) {
    const ExperimentResult r = run_twin_experiment(tiny_l96(std::string(filter_key(k))));
    EXPECT_EQ(r.cycles.size(), 10u);
    EXPECT_TRUE(std::isfinite(r.total_rmse)) << filter_key(k);
    EXPECT_GE(r.total_rmse, 0.0);
  }
}

TEST(CompareFilters, SingleRowMatchesRun) {
  const ExperimentConfig c = tiny_l96("entkf");
  const auto rows = compare_filters({c});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].rmse, run_twin_experiment(c).total_rmse);
}

TEST(CompareFilters, EnsrfAndEntkfAgree) {
  ExperimentConfig c = tiny_l96();
  c.filters = {"ensrf", "entkf"};
  const auto rows = compare_filters(expand_filters(c));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(rows[0].rmse, rows[1].rmse, 1e-6);
}

TEST(CompareFilters, SharedTruthAcrossFilters) {
  ExperimentConfig a = tiny_l96("enkf"), b = tiny_l96("enkf-rs");
  b.nens = 6;  // different start ensemble, same truth and observations
  const TwinSetup sa = make_twin_setup(a), sb = make_twin_setup(b);
  EXPECT_EQ(sa.truth, sb.truth);
  EXPECT_EQ(sa.observations, sb.observations);
}

TEST(CompareFilters, HeterogeneousModelRejected) {
  ExperimentConfig a = tiny_l96(), b = tiny_l96();
  b.model = "l96-6";
  EXPECT_THROW(compare_filters({a, b}), InvalidArgument);
}

TEST(Config, ParsesAndValidates) {
  const auto kv = KeyValueConfig::parse_string(
      "# comment\nmodel = l96-12\nfilter = enkf-rs\nnens = 7\nsynthetic_ratio = 3\n"
      "filters = enkf, ensrf ,entkf\ntiming = off\n");
  const ExperimentConfig c = experiment_config_from(kv);
  EXPECT_EQ(c.model, "l96-12");
  EXPECT_EQ(c.synthetic_members(), 21);
  EXPECT_EQ(c.filters, (std::vector<std::string>{"enkf", "ensrf", "entkf"}));
  EXPECT_FALSE(c.timing);
}

TEST(Config, Errors) {
  auto bad = [](const std::string& text) {
    try {
      experiment_config_from(KeyValueConfig::parse_string(text));
    } catch (const InvalidArgument& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_EQ(bad("colour = red\n"), "config: unknown key 'colour'");
  EXPECT_EQ(bad("nens = 4\nnens = 5\n"), "config line 2: duplicate key 'nens'");
  EXPECT_EQ(bad("p = 1.5\n"), "config: p must lie in (0, 1]");
  EXPECT_EQ(bad("filter = enkf-fs\nnens = 2\n"), "config: shrinkage filters need nens >= 3");
  EXPECT_EQ(bad("nens = lots\n"), "config: 'nens' is not an integer: 'lots'");
  EXPECT_EQ(bad("filter = kalman\n"), "unknown filter 'kalman'");
  EXPECT_EQ(bad("model = qg\n"), "unknown model 'qg'");
  EXPECT_EQ(bad("just words\n"), "config line 1: expected key = value");
}

TEST(Output, CsvFormatting) {
  ExperimentResult r;
  r.filter = "enkf-fs";
  CycleRecord c;
  c.cycle = 1;
  c.rmse = 0.1;
  c.analysis_seconds = 0.5;
  c.diagnostics.gamma = 0.25;
  r.cycles.push_back(c);
  std::ostringstream on, off;
  write_cycle_csv(on, r, true);
  write_cycle_csv(off, r, false);
  EXPECT_EQ(on.str(), std::string(kCycleCsvHeader) + "\n1,0.10000000000000001,0.5,0.25,,,,,\n");
  EXPECT_EQ(off.str(), std::string(kCycleCsvHeader) + "\n1,0.10000000000000001,,0.25,,,,,\n");
}
