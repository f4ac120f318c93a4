#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "../error.hpp"
#include "../filters.hpp"
#include "../models/registry.hpp"

namespace shrinkda {

/// Flat `key = value` file; `#` starts a comment.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw InvalidArgument("config line " + std::to_string(lineno) + ": empty key");
      if (cfg.values_.count(key))
        throw InvalidArgument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      cfg.order_.push_back(key);
      cfg.values_[key] = std::move(value);
    }
    return cfg;
  }

  static KeyValueConfig parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::vector<std::string>& keys() const { return order_; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v = 0.0;
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
      throw InvalidArgument("config: '" + key + "' is not a number: '" + s + "'");
    return v;
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    long long v = 0;
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw InvalidArgument("config: '" + key + "' is not an integer: '" + s + "'");
    return v;
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(get(key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

enum class SpreadMode { Proportional, Uniform };
enum class InitialMode { PerturbedBackground, CenteredOnTruth };

inline std::string spread_mode_key(SpreadMode m) { return m == SpreadMode::Uniform ? "uniform" : "proportional"; }
inline std::string initial_mode_key(InitialMode m) {
  return m == InitialMode::CenteredOnTruth ? "centered_on_truth" : "perturbed_background";
}

struct ExperimentConfig {
  std::string model = "qg-33";
  std::string filter = "enkf";
  std::vector<std::string> filters;  // compare only
  Index nens = 40;
  double synthetic_ratio = 5.0;  // K = round(C * nens)
  std::optional<Index> synthetic_count;  // explicit K; overrides the ratio
  double p = 0.7;
  double sigma_b = 0.05;
  double obs_std = 0.01;
  int n_cycles = 100;
  int steps_per_cycle = 10;
  int spinup_steps = 0;
  std::uint64_t rng_seed = 1;
  std::string output = "out.csv";
  SpreadMode spread_mode = SpreadMode::Proportional;
  InitialMode initial_mode = InitialMode::PerturbedBackground;
  bool timing = true;
  int threads = 0;  // 0: DACLI_THREADS or hardware
  QgParams qg;
  OptimizerSettings optimizer;

  Index synthetic_members() const {
    if (synthetic_count) return *synthetic_count;
    return static_cast<Index>(std::llround(synthetic_ratio * static_cast<double>(nens)));
  }

  void validate() const {
    make_model(model, qg);  // throws on an unknown key
    const FilterKind kind = parse_filter_kind(filter);
    for (const auto& f : filters) parse_filter_kind(f);
    detail::require(p > 0.0 && p <= 1.0, "config: p must lie in (0, 1]");
    detail::require(nens >= 2, "config: nens must be at least 2");
    auto needs_three = [](const std::string& f) { return uses_synthetic_members(parse_filter_kind(f)); };
    bool shrink = uses_synthetic_members(kind);
    for (const auto& f : filters) shrink = shrink || needs_three(f);
    detail::require(!shrink || nens >= 3, "config: shrinkage filters need nens >= 3");
    detail::require(synthetic_ratio >= 0.0, "config: synthetic_ratio must be nonnegative");
    detail::require(!synthetic_count || *synthetic_count >= 0, "config: synthetic_members must be nonnegative");
    detail::require(sigma_b > 0.0, "config: sigma_b must be positive");
    detail::require(obs_std > 0.0, "config: obs_std must be positive");
    detail::require(n_cycles >= 1, "config: n_cycles must be at least 1");
    detail::require(steps_per_cycle >= 1, "config: steps_per_cycle must be at least 1");
    detail::require(spinup_steps >= 0, "config: spinup_steps must be nonnegative");
    detail::require(threads >= 0, "config: threads must be nonnegative");
    qg.validate();
  }
};

inline const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "model", "filter", "filters", "nens", "synthetic_ratio", "synthetic_members", "p", "sigma_b", "obs_std", "n_cycles",
      "steps_per_cycle", "spinup_steps", "rng_seed", "output", "spread_mode", "initial_mode", "timing",
      "threads", "qg_r", "qg_beta", "qg_v", "qg_mu", "qg_tau", "qg_dt", "qg_jacobian_sign",
      "qg_viscosity_sign", "grad_tol", "max_iter", "zeta_lower", "interval_tol"};
  return keys;
}

inline ExperimentConfig experiment_config_from(const KeyValueConfig& kv) {
  const auto& known = known_config_keys();
  for (const auto& k : kv.keys())
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw InvalidArgument("config: unknown key '" + k + "'");

  ExperimentConfig c;
  c.model = kv.get("model", c.model);
  c.filter = kv.get("filter", c.filter);
  c.filters = kv.get_list("filters");
  c.nens = static_cast<Index>(kv.get_int("nens", c.nens));
  c.synthetic_ratio = kv.get_double("synthetic_ratio", c.synthetic_ratio);
  if (kv.has("synthetic_members")) c.synthetic_count = static_cast<Index>(kv.get_int("synthetic_members", 0));
  c.p = kv.get_double("p", c.p);
  c.sigma_b = kv.get_double("sigma_b", c.sigma_b);
  c.obs_std = kv.get_double("obs_std", c.obs_std);
  c.n_cycles = static_cast<int>(kv.get_int("n_cycles", c.n_cycles));
  c.steps_per_cycle = static_cast<int>(kv.get_int("steps_per_cycle", c.steps_per_cycle));
  c.spinup_steps = static_cast<int>(kv.get_int("spinup_steps", c.spinup_steps));
  const long long seed = kv.get_int("rng_seed", static_cast<long long>(c.rng_seed));
  detail::require(seed >= 0, "config: rng_seed must be nonnegative");
  c.rng_seed = static_cast<std::uint64_t>(seed);
  c.output = kv.get("output", c.output);
  c.threads = static_cast<int>(kv.get_int("threads", c.threads));

  const std::string spread = kv.get("spread_mode", "proportional");
  if (spread == "proportional") c.spread_mode = SpreadMode::Proportional;
  else if (spread == "uniform") c.spread_mode = SpreadMode::Uniform;
  else throw InvalidArgument("config: spread_mode must be proportional or uniform");

  const std::string init = kv.get("initial_mode", "perturbed_background");
  if (init == "perturbed_background") c.initial_mode = InitialMode::PerturbedBackground;
  else if (init == "centered_on_truth") c.initial_mode = InitialMode::CenteredOnTruth;
  else throw InvalidArgument("config: initial_mode must be perturbed_background or centered_on_truth");

  const std::string timing = kv.get("timing", "wall");
  if (timing == "wall") c.timing = true;
  else if (timing == "off") c.timing = false;
  else throw InvalidArgument("config: timing must be wall or off");

  c.qg.r = kv.get_double("qg_r", c.qg.r);
  c.qg.beta = kv.get_double("qg_beta", c.qg.beta);
  c.qg.v = kv.get_double("qg_v", c.qg.v);
  c.qg.mu = kv.get_double("qg_mu", c.qg.mu);
  c.qg.tau = kv.get_double("qg_tau", c.qg.tau);
  c.qg.dt = kv.get_double("qg_dt", c.qg.dt);
  c.qg.jacobian_sign = kv.get_double("qg_jacobian_sign", c.qg.jacobian_sign);
  c.qg.viscosity_sign = kv.get_double("qg_viscosity_sign", c.qg.viscosity_sign);

  c.optimizer.grad_tol = kv.get_double("grad_tol", c.optimizer.grad_tol);
  c.optimizer.max_iter = static_cast<int>(kv.get_int("max_iter", c.optimizer.max_iter));
  c.optimizer.zeta_lower = kv.get_double("zeta_lower", c.optimizer.zeta_lower);
  c.optimizer.interval_tol = kv.get_double("interval_tol", c.optimizer.interval_tol);

  c.validate();
  return c;
}

}  // namespace shrinkda
