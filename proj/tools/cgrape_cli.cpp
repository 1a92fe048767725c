#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cgrape/commands.hpp"
#include "cgrape/config.hpp"
#include "cgrape/spin.hpp"

namespace {

struct Options {
  std::string config = "configs/default.yaml";
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> tau;
  std::optional<std::string> controls;
  double theta = cgrape::spin::kTwoPi / 2.0;
};

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config, "YAML run configuration")->capture_default_str();
  cmd->add_option("--out", opt.out, "output directory (overrides 'output')");
  cmd->add_option("--seed", opt.seed, "random seed (overrides 'seed')");
  cmd->add_option("--threads", opt.threads, "worker threads (overrides 'threads')");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cgrape;
  CLI::App app{"Cavity-aware robust pulse optimization and PulsePol simulation"};
  app.require_subcommand(1);
  Options opt;

  auto* optimize = app.add_subcommand("optimize", "optimize the pi and pi/2 pulses");
  add_common(optimize, opt);

  auto* scan = app.add_subcommand("scan", "fidelity versus detuning for optimized and standard pulses");
  add_common(scan, opt);
  scan->add_option("--controls", opt.controls, "directory holding the optimized pulses");

  auto* pulsepol = app.add_subcommand("pulsepol", "PulsePol (delta, sigma) polarization maps");
  add_common(pulsepol, opt);
  pulsepol->add_option("--controls", opt.controls, "directory holding the optimized pulses");
  pulsepol->add_option("--tau", opt.tau, "interpulse spacing in us (skips the resonance scan)");

  auto* standard = app.add_subcommand("standard", "two-segment standard pulse");
  add_common(standard, opt);
  standard->add_option("--theta", opt.theta, "rotation angle in rad, in (0, pi]")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? commands::kExitOk : commands::kExitConfigError;
  }

  try {
    config::RunConfig cfg = config::load(opt.config);
    commands::apply_overrides(cfg, {opt.out, opt.seed, opt.threads, opt.tau});
    const std::string controls_dir = opt.controls.value_or(cfg.output);
    if (optimize->parsed()) return commands::cmd_optimize(cfg, std::cout);
    if (scan->parsed()) return commands::cmd_scan(cfg, controls_dir, std::cout);
    if (pulsepol->parsed()) return commands::cmd_pulsepol(cfg, controls_dir, std::cout);
    if (standard->parsed()) return commands::cmd_standard(cfg, opt.theta, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return commands::kExitConfigError;
  }
  return commands::kExitConfigError;
}
