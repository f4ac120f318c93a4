#pragma once

#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "../ensemble.hpp"
#include "../filters.hpp"
#include "../models/registry.hpp"
#include "../observation.hpp"
#include "../parallel.hpp"
#include "../random.hpp"
#include "config.hpp"

namespace shrinkda {

/// sqrt( (1/N) sum_i ||x^a_i - x^t_i||^2 ), Euclidean norm over the full state.
inline double rmse(const std::vector<Vector>& analyses, const std::vector<Vector>& truth) {
  if (analyses.size() != truth.size()) throw InvalidArgument("rmse: series lengths differ");
  detail::require(!analyses.empty(), "rmse: empty series");
  double sum = 0.0;
  for (std::size_t i = 0; i < analyses.size(); ++i) {
    if (analyses[i].size() != truth[i].size()) throw InvalidArgument("rmse: state lengths differ");
    sum += (analyses[i] - truth[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(analyses.size()));
}

/// member i = truth0 + sigma_b |truth0| o eta_i (proportional), or
/// truth0 + sigma_b eta_i (uniform).  Member i uses child stream i.
inline Ensemble make_initial_ensemble(const Vector& truth0, double sigma_b, Index nens, const RngStream& rng,
                                      SpreadMode mode = SpreadMode::Proportional) {
  detail::require(sigma_b > 0.0, "make_initial_ensemble: sigma_b must be positive");
  detail::require(nens >= 1, "make_initial_ensemble: nens must be positive");
  const Vector scale = mode == SpreadMode::Proportional ? Vector(sigma_b * truth0.cwiseAbs())
                                                        : Vector::Constant(truth0.size(), sigma_b);
  Matrix m(truth0.size(), nens);
  for (Index i = 0; i < nens; ++i) {
    RngStream s = rng.split(static_cast<std::uint64_t>(i));
    m.col(i) = truth0 + scale.cwiseProduct(s.normal_vector(truth0.size()));
  }
  return Ensemble(std::move(m));
}

// Child streams of the experiment root stream.
namespace streams {
inline constexpr std::uint64_t kBackgroundCenter = 1;
inline constexpr std::uint64_t kInitialMembers = 2;
inline constexpr std::uint64_t kObservationNoise = 3;
inline constexpr std::uint64_t kAnalysis = 4;
}  // namespace streams

/// Everything shared between filters: model, truth, observations, initial ensemble.
struct TwinSetup {
  std::shared_ptr<const ModelDefinition> model;
  std::shared_ptr<const ObservationSpec> obs;
  Vector truth0;
  Vector background_center;
  std::vector<Vector> truth;         // after each cycle's forecast, length n_cycles
  std::vector<Vector> observations;  // y_c = H x^t_c + eps_c
  Ensemble initial;
  RngStream root{0, 0};
};

inline TwinSetup make_twin_setup(const ExperimentConfig& cfg) {
  cfg.validate();
  TwinSetup s;
  s.model = std::make_shared<const ModelDefinition>(make_model(cfg.model, cfg.qg));
  s.obs = std::make_shared<const ObservationSpec>(
      ObservationSpec::evenly_spaced(s.model->nstate, cfg.p, cfg.obs_std));
  s.root = RngStream(cfg.rng_seed, 0);

  s.truth0 = s.model->advance(s.model->initial_state(), cfg.spinup_steps);
  if (cfg.initial_mode == InitialMode::PerturbedBackground) {
    const Ensemble center =
        make_initial_ensemble(s.truth0, cfg.sigma_b, 1, s.root.split(streams::kBackgroundCenter), cfg.spread_mode);
    s.background_center = center.member(0);
  } else {
    s.background_center = s.truth0;
  }
  s.initial = make_initial_ensemble(s.background_center, cfg.sigma_b, cfg.nens,
                                    s.root.split(streams::kInitialMembers), cfg.spread_mode);

  const RngStream noise = s.root.split(streams::kObservationNoise);
  const Vector sd = s.obs->variances().cwiseSqrt();
  Vector x = s.truth0;
  for (int c = 0; c < cfg.n_cycles; ++c) {
    x = s.model->advance(x, cfg.steps_per_cycle);
    s.truth.push_back(x);
    RngStream eps = noise.split(static_cast<std::uint64_t>(c));
    s.observations.push_back(s.obs->observe(x) + sd.cwiseProduct(eps.normal_vector(s.obs->nobs())));
  }
  return s;
}

struct CycleRecord {
  int cycle = 0;
  double rmse = 0.0;
  double analysis_seconds = 0.0;
  AnalysisDiagnostics diagnostics;
};

struct ExperimentResult {
  std::string filter;
  std::vector<CycleRecord> cycles;
  double total_rmse = 0.0;
  double analysis_seconds = 0.0;
  int gamma_one_cycles = 0;  // cycles where the shrinkage estimate degenerated to the target
  std::vector<std::string> warnings;
};

/// Propagates every member `steps` model steps.
inline Ensemble forecast(const ModelDefinition& model, const Ensemble& ens, int steps, int threads) {
  Matrix out(ens.nstate(), ens.nens());
  parallel_for(static_cast<std::size_t>(ens.nens()), threads, [&](std::size_t i) {
    const Index k = static_cast<Index>(i);
    out.col(k) = model.advance(ens.member(k), steps);
  });
  return Ensemble(std::move(out));
}

inline ExperimentResult run_filter(const ExperimentConfig& cfg, const TwinSetup& setup, FilterKind kind) {
  const int threads = cfg.threads > 0 ? cfg.threads : default_thread_count();
  FilterSettings settings;
  settings.synthetic_members = cfg.synthetic_members();
  settings.optimizer = cfg.optimizer;
  detail::require(setup.initial.nens() >= minimum_members(kind),
                  "config: filter " + std::string(filter_key(kind)) + " needs more members");

  ExperimentResult res;
  res.filter = std::string(filter_key(kind));
  const RngStream analysis_root = setup.root.split(streams::kAnalysis);
  Ensemble ens = setup.initial;
  double sum_sq = 0.0;
  for (int c = 0; c < cfg.n_cycles; ++c) {
    CycleRecord rec;
    rec.cycle = c + 1;
    try {
      const Ensemble bg = forecast(*setup.model, ens, cfg.steps_per_cycle, threads);
      const auto t0 = std::chrono::steady_clock::now();
      AnalysisResult a = analyze(kind, bg, setup.observations[static_cast<std::size_t>(c)], *setup.obs, settings,
                                 analysis_root.split(static_cast<std::uint64_t>(c)));
      const auto t1 = std::chrono::steady_clock::now();
      rec.analysis_seconds = std::chrono::duration<double>(t1 - t0).count();
      rec.diagnostics = a.diagnostics;
      ens = std::move(a.analysis);
    } catch (const Error& e) {
      throw Error("cycle " + std::to_string(c + 1) + " (" + res.filter + "): " + e.what());
    }
    const double err = (ensemble_mean(ens) - setup.truth[static_cast<std::size_t>(c)]).norm();
    if (!std::isfinite(err)) throw Error("cycle " + std::to_string(c + 1) + " (" + res.filter + "): non-finite RMSE");
    rec.rmse = err;
    sum_sq += err * err;
    res.analysis_seconds += rec.analysis_seconds;
    if (rec.diagnostics.gamma && *rec.diagnostics.gamma >= 1.0) ++res.gamma_one_cycles;
    res.cycles.push_back(rec);
  }
  res.total_rmse = std::sqrt(sum_sq / static_cast<double>(cfg.n_cycles));
  if (res.gamma_one_cycles > 0)
    res.warnings.push_back("shrinkage coefficient reached 1 (covariance equals the scaled identity) in " +
                           std::to_string(res.gamma_one_cycles) + " cycle(s)");
  return res;
}

inline ExperimentResult run_twin_experiment(const ExperimentConfig& cfg) {
  const TwinSetup setup = make_twin_setup(cfg);
  return run_filter(cfg, setup, parse_filter_kind(cfg.filter));
}

struct ComparisonRow {
  std::string filter;
  double rmse = 0.0;
  double analysis_seconds = 0.0;
  ExperimentResult result;
};

/// Runs each config against the same truth and observations, in order.
///
/// All configs must share model, cycle layout, observation network and seed.
inline std::vector<ComparisonRow> compare_filters(const std::vector<ExperimentConfig>& cfgs) {
  detail::require(!cfgs.empty(), "compare_filters: no configurations");
  const ExperimentConfig& first = cfgs.front();
  for (const auto& c : cfgs) {
    if (c.model != first.model) throw InvalidArgument("compare_filters: heterogeneous model keys");
    detail::require(c.n_cycles == first.n_cycles && c.steps_per_cycle == first.steps_per_cycle &&
                        c.rng_seed == first.rng_seed && c.p == first.p && c.obs_std == first.obs_std &&
                        c.spinup_steps == first.spinup_steps,
                    "compare_filters: configurations must share truth and observation settings");
  }
  const TwinSetup setup = make_twin_setup(first);
  std::vector<ComparisonRow> rows;
  for (const auto& c : cfgs) {
    // The initial ensemble depends on nens and sigma_b; rebuild only when they differ.
    const bool same_start = c.nens == first.nens && c.sigma_b == first.sigma_b &&
                            c.spread_mode == first.spread_mode && c.initial_mode == first.initial_mode;
    ExperimentResult r = same_start ? run_filter(c, setup, parse_filter_kind(c.filter))
                                    : run_filter(c, make_twin_setup(c), parse_filter_kind(c.filter));
    rows.push_back({r.filter, r.total_rmse, r.analysis_seconds, std::move(r)});
  }
  return rows;
}

/// One config per entry of cfg.filters (or cfg.filter when the list is empty).
inline std::vector<ExperimentConfig> expand_filters(const ExperimentConfig& cfg) {
  std::vector<ExperimentConfig> out;
  if (cfg.filters.empty()) {
    out.push_back(cfg);
    return out;
  }
  for (const auto& f : cfg.filters) {
    ExperimentConfig c = cfg;
    c.filter = f;
    c.filters.clear();
    out.push_back(c);
  }
  return out;
}

}  // namespace shrinkda
