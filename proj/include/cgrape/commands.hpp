#pragma once

// Implementations behind the command-line front end. Each command reads a
// RunConfig, writes its artifacts below cfg.output and returns an exit code.
// Configuration and I/O problems surface as exceptions; the caller maps them
// to exit code 1.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cgrape/config.hpp"
#include "cgrape/ensemble.hpp"
#include "cgrape/grape.hpp"

namespace cgrape::commands {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitNotConverged = 2;

/// Scalar fields that command-line flags may override.
struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> tau;
};

void apply_overrides(config::RunConfig& cfg, const Overrides& overrides);

/// `n` equally spaced points on [lo, hi]; a single point sits at lo.
std::vector<double> linspace(double lo, double hi, int n);

/// Starting controls for an X rotation by theta, as selected by the config.
cavity::ControlWaveform initial_controls(const config::RunConfig& cfg, double theta);

/// Optimizes an X rotation by theta from initial_controls.
grape::OptimizeResult optimize_x_pulse(const config::RunConfig& cfg, double theta);

/// The four pulse types written by `optimize`, read back from `dir`.
ensemble::PulseLibrary load_optimized_library(const config::RunConfig& cfg,
                                              const std::string& dir);

/// Two-segment standard pulses sampled at the configured slice length.
ensemble::PulseLibrary standard_library(const config::RunConfig& cfg);

std::vector<double> sweep_deltas(const config::RunConfig& cfg);
/// sigma >= 0 only: the noise is symmetric in the sign of sigma.
std::vector<double> sweep_sigmas(const config::RunConfig& cfg);

struct PulsePolComparison {
  double tau = 0.0;
  bool tau_scanned = false;
  ensemble::SweepResult optimized;
  ensemble::SweepResult standard;
  std::vector<double> optimized_curve;  // region-averaged |<sz_n>| per cycle
  std::vector<double> standard_curve;
};

/// Locates tau on the optimized library (unless cfg.pulsepol.tau is set) and
/// sweeps both libraries over the configured (delta, sigma) grid.
PulsePolComparison compare_pulsepol(const config::RunConfig& cfg,
                                    const ensemble::PulseLibrary& optimized);

int cmd_optimize(const config::RunConfig& cfg, std::ostream& log);
int cmd_scan(const config::RunConfig& cfg, const std::string& controls_dir, std::ostream& log);
int cmd_pulsepol(const config::RunConfig& cfg, const std::string& controls_dir,
                 std::ostream& log);
int cmd_standard(const config::RunConfig& cfg, double theta, std::ostream& log);

}  // namespace cgrape::commands
