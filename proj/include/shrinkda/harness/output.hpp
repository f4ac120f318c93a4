#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "experiment.hpp"

namespace shrinkda {

inline constexpr const char* kCycleCsvHeader =
    "cycle,rmse,analysis_seconds,gamma,phi,delta,dual_zeta,cost_primal,cost_dual";
inline constexpr const char* kComparisonCsvHeader = "filter,rmse,analysis_seconds";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

/// One row per cycle; timing off leaves analysis_seconds empty so reruns are byte-identical.
inline void write_cycle_csv(std::ostream& out, const ExperimentResult& r, bool timing = true) {
  out << kCycleCsvHeader << '\n';
  for (const auto& c : r.cycles) {
    const auto& d = c.diagnostics;
    out << c.cycle << ',' << format_double(c.rmse) << ',' << (timing ? format_double(c.analysis_seconds) : "")
        << ',' << format_optional(d.gamma) << ',' << format_optional(d.phi) << ',' << format_optional(d.delta)
        << ',' << format_optional(d.dual_zeta) << ',' << format_optional(d.cost_primal) << ','
        << format_optional(d.cost_dual) << '\n';
  }
}

inline void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows, bool timing = true) {
  out << kComparisonCsvHeader << '\n';
  for (const auto& r : rows)
    out << r.filter << ',' << format_double(r.rmse) << ',' << (timing ? format_double(r.analysis_seconds) : "")
        << '\n';
}

/// Self-describing run metadata, one `key = value` per line.
inline void write_metadata(std::ostream& out, const ExperimentConfig& c, const ModelDefinition& model,
                           const ObservationSpec& obs) {
  out << "model = " << c.model << '\n';
  out << "nstate = " << model.nstate << '\n';
  out << "nobs = " << obs.nobs() << '\n';
  out << "nens = " << c.nens << '\n';
  out << "synthetic_ratio = " << format_double(c.synthetic_ratio) << '\n';
  out << "synthetic_members = " << c.synthetic_members() << '\n';
  out << "p = " << format_double(c.p) << '\n';
  out << "sigma_b = " << format_double(c.sigma_b) << '\n';
  out << "obs_std = " << format_double(c.obs_std) << '\n';
  out << "n_cycles = " << c.n_cycles << '\n';
  out << "steps_per_cycle = " << c.steps_per_cycle << '\n';
  out << "spinup_steps = " << c.spinup_steps << '\n';
  out << "rng_seed = " << c.rng_seed << '\n';
  out << "spread_mode = " << spread_mode_key(c.spread_mode) << '\n';
  out << "initial_mode = " << initial_mode_key(c.initial_mode) << '\n';
  out << "model_dt = " << format_double(model.dt) << '\n';
  if (model.forcing) out << "l96_forcing = " << format_double(*model.forcing) << '\n';
  if (model.qg_params) {
    const QgParams& q = *model.qg_params;
    out << "qg_r = " << format_double(q.r) << '\n';
    out << "qg_beta = " << format_double(q.beta) << '\n';
    out << "qg_v = " << format_double(q.v) << '\n';
    out << "qg_mu = " << format_double(q.mu) << '\n';
    out << "qg_tau = " << format_double(q.tau) << '\n';
    out << "qg_jacobian_sign = " << format_double(q.jacobian_sign) << '\n';
    out << "qg_viscosity_sign = " << format_double(q.viscosity_sign) << '\n';
  }
}

inline std::string metadata_path(const std::string& output) { return output + ".meta.txt"; }

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

}  // namespace shrinkda
