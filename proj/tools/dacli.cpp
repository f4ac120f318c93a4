// dacli: twin-experiment driver and property-suite runner.
//
// Exit codes: 0 success, 2 invalid input or failed validation, 1 runtime error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "shrinkda/shrinkda.hpp"
#include "shrinkda/testing/properties.hpp"

namespace {

using namespace shrinkda;

struct Overrides {
  std::string config;
  std::optional<std::string> filter;
  std::optional<std::string> filters;
  std::optional<double> synthetic_ratio;
  std::optional<long long> seed;
  std::optional<std::string> output;
  std::optional<int> threads;
};

ExperimentConfig load_config(const Overrides& o) {
  ExperimentConfig c = experiment_config_from(KeyValueConfig::load(o.config));
  if (o.filter) c.filter = *o.filter;
  if (o.filters) {
    c.filters.clear();
    std::stringstream ss(*o.filters);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) c.filters.push_back(item);
  }
  if (o.synthetic_ratio) {
    c.synthetic_ratio = *o.synthetic_ratio;
    c.synthetic_count.reset();
  }
  if (o.seed) {
    if (*o.seed < 0) throw InvalidArgument("--seed must be nonnegative");
    c.rng_seed = static_cast<std::uint64_t>(*o.seed);
  }
  if (o.output) c.output = *o.output;
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

void write_meta(const ExperimentConfig& cfg, const TwinSetup& setup, const std::vector<ComparisonRow>& rows) {
  auto meta = open_output(metadata_path(cfg.output));
  write_metadata(meta, cfg, *setup.model, *setup.obs);
  for (const auto& r : rows) {
    meta << "total_rmse." << r.filter << " = " << format_double(r.rmse) << '\n';
    for (const auto& w : r.result.warnings) meta << "warning." << r.filter << " = " << w << '\n';
  }
}

int run_command(const Overrides& o) {
  const ExperimentConfig cfg = load_config(o);
  const TwinSetup setup = make_twin_setup(cfg);
  ExperimentResult res = run_filter(cfg, setup, parse_filter_kind(cfg.filter));
  {
    auto out = open_output(cfg.output);
    write_cycle_csv(out, res, cfg.timing);
  }
  for (const auto& w : res.warnings) std::cerr << "warning: " << res.filter << ": " << w << '\n';
  std::vector<ComparisonRow> rows{{res.filter, res.total_rmse, res.analysis_seconds, res}};
  write_meta(cfg, setup, rows);
  std::printf("%s rmse=%.6g analysis_seconds=%.3f cycles=%d -> %s\n", res.filter.c_str(), res.total_rmse,
              res.analysis_seconds, cfg.n_cycles, cfg.output.c_str());
  return 0;
}

int compare_command(const Overrides& o) {
  const ExperimentConfig cfg = load_config(o);
  if (cfg.filters.empty()) throw InvalidArgument("compare: config needs a 'filters' list");
  const auto rows = compare_filters(expand_filters(cfg));
  {
    auto out = open_output(cfg.output);
    write_comparison_csv(out, rows, cfg.timing);
  }
  for (const auto& r : rows) {
    auto out = open_output(cfg.output + "." + r.filter + ".csv");
    write_cycle_csv(out, r.result, cfg.timing);
    for (const auto& w : r.result.warnings) std::cerr << "warning: " << r.filter << ": " << w << '\n';
  }
  write_meta(cfg, make_twin_setup(cfg), rows);
  std::printf("%-8s %14s %16s\n", "filter", "rmse", "analysis_seconds");
  for (const auto& r : rows) std::printf("%-8s %14.6g %16.3f\n", r.filter.c_str(), r.rmse, r.analysis_seconds);
  return 0;
}

int validate_command(const std::string& configs) {
  const int failed = properties::run_validation(std::cout, configs);
  return failed == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble data assimilation twin experiments with shrinkage covariance filters"};
  app.require_subcommand(1);

  Overrides run_opts, cmp_opts;
  auto add_common = [](CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "key = value experiment file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override rng_seed");
    sub->add_option("--output", o.output, "override output path");
    sub->add_option("--threads", o.threads, "worker threads for member propagation");
    sub->add_option("--synthetic-ratio", o.synthetic_ratio, "C in K = C * nens (enkf-fs, enkf-rs)");
  };
  auto* run = app.add_subcommand("run", "run one filter on a twin experiment");
  add_common(run, run_opts);
  run->add_option("--filter", run_opts.filter, "enkf, ensrf, entkf, enkf-n, enkf-du, enkf-fs, enkf-rs");

  auto* cmp = app.add_subcommand("compare", "run several filters against one truth");
  add_common(cmp, cmp_opts);
  cmp->add_option("--filters", cmp_opts.filters, "comma-separated filter keys");

  std::string config_dir;
  auto* val = app.add_subcommand("validate", "run the property suite on small instances");
  val->add_option("--configs", config_dir, "directory of shipped configs to smoke-run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return run_command(run_opts);
    if (*cmp) return compare_command(cmp_opts);
    if (*val) {
      if (config_dir.empty() && std::filesystem::is_directory("configs")) config_dir = "configs";
      return validate_command(config_dir);
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
