#include "cgrape/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <type_traits>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace cgrape::config {

namespace {

// A YAML mapping whose keys are consumed one by one; leftovers are errors.
class Section {
 public:
  Section(YAML::Node node, std::string name, const std::string& source)
      : node_(std::move(node)), name_(std::move(name)), source_(source) {
    if (!node_.IsMap()) fail(node_, "'" + name_ + "' must be a mapping");
  }

  template <typename T>
  T get(const std::string& key) {
    return convert<T>(require(key), key);
  }

  template <typename T>
  std::optional<T> get_optional(const std::string& key) {
    seen_.insert(key);
    const YAML::Node value = node_[key];
    if (!value) return std::nullopt;
    return convert<T>(value, key);
  }

  Section section(const std::string& key) {
    return Section(require(key), qualified(key), source_);
  }

  /// Rejects every key not consumed so far.
  void finish() const {
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(kv.first, "unknown key '" + qualified(key) + "'");
    }
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& message) const {
    const int line = at.Mark().line >= 0 ? at.Mark().line + 1 : 0;
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + message);
  }

  void check(bool ok, const std::string& key, const std::string& message) const {
    if (!ok) fail(node_[key], "'" + qualified(key) + "' " + message);
  }

 private:
  YAML::Node require(const std::string& key) {
    seen_.insert(key);
    const YAML::Node value = node_[key];
    if (!value) fail(node_, "missing key '" + qualified(key) + "'");
    return value;
  }

  template <typename T>
  T convert(const YAML::Node& value, const std::string& key) const {
    try {
      const T out = value.as<T>();
      if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(out)) fail(value, "'" + qualified(key) + "' must be finite");
      }
      return out;
    } catch (const YAML::Exception&) {
      fail(value, "'" + qualified(key) + "' has the wrong type");
    }
  }

  std::string qualified(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }

  YAML::Node node_;
  std::string name_;
  const std::string& source_;
  std::set<std::string> seen_;
};

RunConfig build(const YAML::Node& root_node, const std::string& source) {
  Section root(root_node, "", source);
  RunConfig cfg;

  {
    Section s = root.section("cavity");
    cfg.cavity.gamma = s.get<double>("gamma");
    cfg.cavity.omega_max = s.get<double>("omega_max");
    s.check(cfg.cavity.gamma > 0.0, "gamma", "must be positive");
    s.check(cfg.cavity.omega_max > 0.0, "omega_max", "must be positive");
    s.finish();
  }
  {
    Section s = root.section("pulse");
    cfg.pulse.duration = s.get<double>("duration");
    cfg.pulse.steps = s.get<int>("steps");
    cfg.pulse.ratio = s.get<int>("ratio");
    s.check(cfg.pulse.duration > 0.0, "duration", "must be positive");
    s.check(cfg.pulse.steps >= 1, "steps", "must be >= 1");
    s.check(cfg.pulse.ratio >= 1 && cfg.pulse.steps % cfg.pulse.ratio == 0, "ratio",
            "must be >= 1 and divide pulse.steps");
    cfg.cavity.r = cfg.pulse.ratio;
    s.finish();
  }
  {
    Section s = root.section("optimization");
    auto& o = cfg.optimization;
    o.detuning_span = s.get<double>("detuning_span");
    o.detuning_points = s.get<int>("detuning_points");
    o.alpha = s.get<double>("alpha");
    o.fidelity_threshold = s.get<double>("fidelity_threshold");
    o.max_iters = s.get<int>("max_iters");
    o.max_residual = s.get<double>("max_residual");
    o.learning_rate = s.get<double>("learning_rate");
    o.init = s.get<std::string>("init");
    o.init_amplitude = s.get<double>("init_amplitude");
    s.check(o.detuning_span >= 0.0, "detuning_span", "must be >= 0");
    s.check(o.detuning_points >= 1, "detuning_points", "must be >= 1");
    s.check(o.alpha >= 0.0, "alpha", "must be >= 0");
    s.check(o.fidelity_threshold >= 0.0, "fidelity_threshold", "must be >= 0");
    s.check(o.max_iters >= 1, "max_iters", "must be >= 1");
    s.check(o.max_residual >= 0.0, "max_residual", "must be >= 0");
    s.check(o.learning_rate > 0.0, "learning_rate", "must be positive");
    s.check(o.init == "composite" || o.init == "random", "init",
            "must be 'composite' or 'random'");
    s.check(o.init_amplitude >= 0.0 && o.init_amplitude <= 1.0, "init_amplitude",
            "must lie in [0, 1]");
    s.finish();
  }
  {
    Section s = root.section("pulsepol");
    auto& p = cfg.pulsepol;
    p.blocks_per_sequence = s.get<int>("blocks_per_sequence");
    p.sequences_per_cycle = s.get<int>("sequences_per_cycle");
    p.cycles = s.get<int>("cycles");
    p.tau = s.get_optional<double>("tau");
    s.check(p.blocks_per_sequence >= 1, "blocks_per_sequence", "must be >= 1");
    s.check(p.sequences_per_cycle >= 1, "sequences_per_cycle", "must be >= 1");
    s.check(p.cycles >= 1, "cycles", "must be >= 1");
    if (p.tau) s.check(*p.tau > 0.0, "tau", "must be positive");
    Section scan = s.section("tau_scan");
    p.tau_scan.lo_factor = scan.get<double>("lo_factor");
    p.tau_scan.hi_factor = scan.get<double>("hi_factor");
    p.tau_scan.points = scan.get<int>("points");
    scan.check(p.tau_scan.lo_factor > 0.0, "lo_factor", "must be positive");
    scan.check(p.tau_scan.hi_factor > p.tau_scan.lo_factor, "hi_factor",
               "must exceed lo_factor");
    scan.check(p.tau_scan.points >= 3, "points", "must be >= 3");
    scan.finish();
    s.finish();
  }
  {
    Section s = root.section("nuclear");
    cfg.nuclear.b_field = s.get<double>("b_field");
    cfg.nuclear.a_x = s.get<double>("a_x");
    cfg.nuclear.a_z = s.get<double>("a_z");
    s.check(cfg.nuclear.b_field > 0.0, "b_field", "must be positive");
    s.finish();
  }
  {
    Section s = root.section("noise");
    cfg.noise_realizations = s.get<int>("realizations");
    s.check(cfg.noise_realizations >= 1, "realizations", "must be >= 1");
    s.finish();
  }
  {
    Section s = root.section("sweep");
    auto& w = cfg.sweep;
    w.delta_max = s.get<double>("delta_max");
    w.delta_points = s.get<int>("delta_points");
    w.sigma_max = s.get<double>("sigma_max");
    w.sigma_points = s.get<int>("sigma_points");
    w.region_delta = s.get<double>("region_delta");
    w.region_sigma = s.get<double>("region_sigma");
    s.check(w.delta_max >= 0.0, "delta_max", "must be >= 0");
    s.check(w.delta_points >= 1, "delta_points", "must be >= 1");
    s.check(w.sigma_max >= 0.0, "sigma_max", "must be >= 0");
    s.check(w.sigma_points >= 1, "sigma_points", "must be >= 1");
    s.check(w.region_delta >= 0.0, "region_delta", "must be >= 0");
    s.check(w.region_sigma >= 0.0, "region_sigma", "must be >= 0");
    s.finish();
  }
  {
    Section s = root.section("scan");
    cfg.scan.delta_max = s.get<double>("delta_max");
    cfg.scan.delta_points = s.get<int>("delta_points");
    s.check(cfg.scan.delta_max >= 0.0, "delta_max", "must be >= 0");
    s.check(cfg.scan.delta_points >= 1, "delta_points", "must be >= 1");
    s.finish();
  }
  cfg.output = root.get<std::string>("output");
  cfg.seed = root.get<std::uint64_t>("seed");
  cfg.threads = root.get<int>("threads");
  root.check(cfg.threads >= 1, "threads", "must be >= 1");
  root.finish();
  return cfg;
}

}  // namespace

grape::CostSpec RunConfig::cost_spec(double theta) const {
  grape::CostSpec spec;
  spec.target = spin::rotation(spin::Axis::x, theta);
  spec.detunings =
      grape::uniform_detuning_grid(optimization.detuning_span, optimization.detuning_points);
  spec.alpha = optimization.alpha;
  spec.fidelity_threshold = optimization.fidelity_threshold;
  spec.max_iters = optimization.max_iters;
  spec.max_residual = optimization.max_residual;
  return spec;
}

grape::OptimizeOptions RunConfig::optimize_options() const {
  grape::OptimizeOptions options;
  options.adam.learning_rate = optimization.learning_rate;
  options.threads = threads;
  return options;
}

RunConfig parse(const std::string& yaml_text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root || root.IsNull()) throw ConfigError(source + ":1: empty configuration");
  return build(root, source);
}

RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ":0: cannot open configuration file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path);
}

}  // namespace cgrape::config
