#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "cgrape/commands.hpp"
#include "cgrape/config.hpp"
#include "cgrape/io.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cgrape;

// Small but complete configuration; every test edits a copy of it.
const std::string kSmallConfig = R"(cavity:
  gamma: 20.0
  omega_max: 24.0
pulse:
  duration: 0.15
  steps: 150
  ratio: 5
optimization:
  detuning_span: 2.0
  detuning_points: 3
  alpha: 0.01
  fidelity_threshold: 0.05
  max_iters: 400
  max_residual: 1.0
  learning_rate: 0.02
  init: composite
  init_amplitude: 0.5
pulsepol:
  blocks_per_sequence: 1
  sequences_per_cycle: 2
  cycles: 3
  tau: 4.6
  tau_scan:
    lo_factor: 0.75
    hi_factor: 1.25
    points: 11
nuclear:
  b_field: 0.015
  a_x: 0.004
  a_z: 0.0037
noise:
  realizations: 2
sweep:
  delta_max: 3.0
  delta_points: 3
  sigma_max: 0.02
  sigma_points: 2
  region_delta: 2.0
  region_sigma: 0.01
scan:
  delta_max: 5.0
  delta_points: 11
output: out
seed: 7
threads: 1
)";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cgrape_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_config(const fs::path& dir, const std::string& text) {
  const fs::path path = dir / "config.yaml";
  std::ofstream(path) << text;
  return path.string();
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  if (pos != std::string::npos) text.replace(pos, from.size(), to);
  return text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

config::RunConfig small_config(const fs::path& out) {
  auto cfg = config::parse(kSmallConfig);
  cfg.output = out.string();
  return cfg;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CGRAPE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Config, ParsesCompleteFile) {
  const auto cfg = config::parse(kSmallConfig);
  EXPECT_EQ(cfg.cavity.gamma, 20.0);
  EXPECT_EQ(cfg.cavity.r, 5);
  EXPECT_EQ(cfg.pulse.control_steps(), 30u);
  EXPECT_NEAR(cfg.pulse.delta_t(), 0.005, 1e-15);
  ASSERT_TRUE(cfg.pulsepol.tau.has_value());
  EXPECT_EQ(*cfg.pulsepol.tau, 4.6);
  EXPECT_EQ(cfg.seed, 7u);
  const auto spec = cfg.cost_spec(1.0);
  EXPECT_EQ(spec.detunings.size(), 3u);
  EXPECT_NO_THROW(spec.validate());
}

TEST(Config, TauIsOptional) {
  const auto cfg = config::parse(replace(kSmallConfig, "  tau: 4.6\n", ""));
  EXPECT_FALSE(cfg.pulsepol.tau.has_value());
}

TEST(Config, MissingKeyIsNamedWithLine) {
  try {
    config::parse(replace(kSmallConfig, "  gamma: 20.0\n", ""), "run.yaml");
    FAIL() << "expected ConfigError";
  } catch (const config::ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("cavity.gamma"), std::string::npos) << msg;
    EXPECT_TRUE(std::regex_search(msg, std::regex("^run\\.yaml:[0-9]+: "))) << msg;
  }
}

TEST(Config, UnknownKeyRejectedAtItsLine) {
  try {
    config::parse(replace(kSmallConfig, "  omega_max: 24.0\n", "  omega_max: 24.0\n  colour: 3\n"),
                  "run.yaml");
    FAIL() << "expected ConfigError";
  } catch (const config::ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("run.yaml:4:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("cavity.colour"), std::string::npos) << msg;
  }
}

TEST(Config, InvalidValuesRejected) {
  EXPECT_THROW(config::parse(replace(kSmallConfig, "gamma: 20.0", "gamma: -1")),
               config::ConfigError);
  EXPECT_THROW(config::parse(replace(kSmallConfig, "ratio: 5", "ratio: 7")),
               config::ConfigError);
  EXPECT_THROW(config::parse(replace(kSmallConfig, "init: composite", "init: magic")),
               config::ConfigError);
  EXPECT_THROW(config::parse(replace(kSmallConfig, "steps: 150", "steps: many")),
               config::ConfigError);
  EXPECT_THROW(config::parse("cavity: [1, 2"), config::ConfigError);
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"default.yaml", "full_scale.yaml"}) {
    EXPECT_NO_THROW(config::load(std::string(CGRAPE_SOURCE_DIR) + "/configs/" + name)) << name;
  }
}

TEST(Overrides, ReplaceScalarFields) {
  auto cfg = config::parse(kSmallConfig);
  commands::apply_overrides(cfg, {std::string("elsewhere"), 11u, 3, 5.5});
  EXPECT_EQ(cfg.output, "elsewhere");
  EXPECT_EQ(cfg.seed, 11u);
  EXPECT_EQ(cfg.threads, 3);
  EXPECT_EQ(*cfg.pulsepol.tau, 5.5);
  EXPECT_THROW(commands::apply_overrides(cfg, {{}, {}, 0, {}}), config::ConfigError);
}

TEST(Linspace, EndpointsAndSinglePoint) {
  EXPECT_EQ(commands::linspace(-1.0, 1.0, 3), (std::vector<double>{-1.0, 0.0, 1.0}));
  EXPECT_EQ(commands::linspace(2.0, 5.0, 1), (std::vector<double>{2.0}));
}

TEST(Commands, OptimizeWritesFourPulseTypes) {
  const auto dir = scratch("optimize");
  const auto cfg = small_config(dir / "out");
  std::ostringstream log;
  EXPECT_EQ(commands::cmd_optimize(cfg, log), commands::kExitOk) << log.str();
  for (const char* stem : {"pi_x", "pi_y", "pi2_x", "pi2_y"}) {
    for (const char* suffix : {"_controls.csv", "_intracavity.csv", "_trace.csv", "_meta.json"}) {
      EXPECT_TRUE(fs::exists(dir / "out" / (std::string(stem) + suffix))) << stem << suffix;
    }
  }
  const auto trace = io::read_csv((dir / "out" / "pi_x_trace.csv").string());
  EXPECT_EQ(trace.header, (std::vector<std::string>{"iter", "phi", "residual_x", "residual_y"}));
  const auto x = cavity::read_controls_csv((dir / "out" / "pi_x_controls.csv").string());
  const auto y = cavity::read_controls_csv((dir / "out" / "pi_y_controls.csv").string());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(y.fx[i], -x.fy[i]);
    EXPECT_EQ(y.fy[i], x.fx[i]);
  }
}

TEST(Commands, RerunIsByteIdentical) {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  std::ostringstream log;
  commands::cmd_optimize(small_config(a), log);
  commands::cmd_optimize(small_config(b), log);
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
  }
}

TEST(Commands, ScanPulsepolAndStandard) {
  const auto dir = scratch("pipeline");
  auto cfg = small_config(dir);
  std::ostringstream log;
  ASSERT_EQ(commands::cmd_optimize(cfg, log), commands::kExitOk);

  ASSERT_EQ(commands::cmd_scan(cfg, dir.string(), log), commands::kExitOk);
  const auto scan = io::read_csv((dir / "fidelity_scan.csv").string());
  EXPECT_EQ(scan.rows.size(), 11u);
  EXPECT_EQ(scan.header.front(), "delta_MHz");

  cfg.scan.delta_points = 1;
  ASSERT_EQ(commands::cmd_scan(cfg, dir.string(), log), commands::kExitOk);
  EXPECT_EQ(io::read_csv((dir / "fidelity_scan.csv").string()).rows.size(), 1u);

  ASSERT_EQ(commands::cmd_pulsepol(cfg, dir.string(), log), commands::kExitOk);
  for (const char* f : {"map_optimized.csv", "map_standard.csv", "curve_optimized.csv",
                        "curve_standard.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(io::read_csv((dir / "map_optimized.csv").string()).rows.size(), 6u);
  EXPECT_EQ(io::read_csv((dir / "curve_standard.csv").string()).rows.size(), 3u);

  ASSERT_EQ(commands::cmd_standard(cfg, 3.141592653589793, log), commands::kExitOk);
  const auto field = io::read_csv((dir / "standard_intracavity.csv").string());
  EXPECT_LE(std::abs(field.rows.back()[1]), 1e-9 * 24.0);
}

TEST(Commands, PulsepolThreadsMatchSerial) {
  const auto dir = scratch("threads");
  auto cfg = small_config(dir);
  std::ostringstream log;
  ASSERT_EQ(commands::cmd_optimize(cfg, log), commands::kExitOk);
  const auto lib = commands::load_optimized_library(cfg, dir.string());
  const auto serial = commands::compare_pulsepol(cfg, lib);
  cfg.threads = 4;
  const auto parallel = commands::compare_pulsepol(cfg, lib);
  EXPECT_EQ(serial.optimized.curves, parallel.optimized.curves);
  EXPECT_EQ(serial.standard.curves, parallel.standard.curves);
}

TEST(Commands, PulsepolWarnsAtFullScale) {
  const auto dir = scratch("warn");
  auto cfg = small_config(dir);
  std::ostringstream log;
  ASSERT_EQ(commands::cmd_optimize(cfg, log), commands::kExitOk);
  cfg.pulsepol.cycles = 500;
  cfg.sweep.delta_points = 1;
  cfg.sweep.sigma_points = 1;
  cfg.sweep.region_delta = cfg.sweep.delta_max;
  std::ostringstream warn;
  ASSERT_EQ(commands::cmd_pulsepol(cfg, dir.string(), warn), commands::kExitOk);
  EXPECT_NE(warn.str().find("warning"), std::string::npos);
}

TEST(Commands, MissingArtifactsThrow) {
  const auto dir = scratch("missing");
  const auto cfg = small_config(dir);
  std::ostringstream log;
  EXPECT_THROW(commands::cmd_scan(cfg, dir.string(), log), std::runtime_error);
  EXPECT_THROW(commands::cmd_pulsepol(cfg, dir.string(), log), std::runtime_error);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const std::string good = write_config(dir, kSmallConfig);
  const std::string out = (dir / "out").string();
  EXPECT_EQ(run_cli("optimize --config " + good + " --out " + out, dir / "log1"), 0);

  const std::string unreachable = write_config(
      dir, replace(replace(kSmallConfig, "fidelity_threshold: 0.05", "fidelity_threshold: 1.0e-9"),
                   "max_iters: 400", "max_iters: 1"));
  EXPECT_EQ(run_cli("optimize --config " + unreachable + " --out " + out, dir / "log2"), 2);

  const std::string broken = write_config(dir, replace(kSmallConfig, "  gamma: 20.0\n", ""));
  EXPECT_EQ(run_cli("optimize --config " + broken, dir / "log3"), 1);
  EXPECT_NE(slurp(dir / "log3").find("cavity.gamma"), std::string::npos);

  EXPECT_EQ(run_cli("standard --config " + good + " --out " + out + " --theta 4", dir / "log4"),
            1);
  EXPECT_EQ(run_cli("bogus", dir / "log5"), 1);
}

}  // namespace
