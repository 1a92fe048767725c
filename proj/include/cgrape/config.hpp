#pragma once

// Run configuration loaded from a YAML file. Every key is required except
// pulsepol.tau; unknown keys are rejected. Errors carry the file name and
// line of the offending node.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "cgrape/cavity.hpp"
#include "cgrape/ensemble.hpp"
#include "cgrape/grape.hpp"

namespace cgrape::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pulse window: duration T split into N slices, r slices per control step.
struct PulseGrid {
  double duration = 0.25;  // us
  int steps = 1000;        // N
  int ratio = 10;          // r

  double dt() const { return duration / steps; }
  double delta_t() const { return dt() * ratio; }
  std::size_t control_steps() const { return static_cast<std::size_t>(steps / ratio); }
};

struct OptimizationConfig {
  double detuning_span = 5.0;  // MHz
  int detuning_points = 21;
  double alpha = 1e-2;
  double fidelity_threshold = 1e-3;
  int max_iters = 20000;
  double max_residual = 0.24;  // MHz
  double learning_rate = 1e-2;
  std::string init = "composite";  // composite | random
  double init_amplitude = 0.5;     // random init only
};

struct TauScanConfig {
  double lo_factor = 0.75;  // times resonance_guess
  double hi_factor = 1.25;
  int points = 21;
};

struct PulsePolSection {
  int blocks_per_sequence = 1;
  int sequences_per_cycle = 2;
  int cycles = 100;
  std::optional<double> tau;  // us; skips the resonance scan when set
  TauScanConfig tau_scan;
};

struct SweepConfig {
  double delta_max = 5.0;  // MHz
  int delta_points = 9;
  double sigma_max = 0.02;
  int sigma_points = 5;
  double region_delta = 2.0;   // averaging region |delta| <= region_delta
  double region_sigma = 0.01;  // and sigma <= region_sigma
};

struct FidelityScanConfig {
  double delta_max = 5.0;  // MHz
  int delta_points = 201;
};

struct RunConfig {
  cavity::CavityParams cavity;  // cavity.r mirrors pulse.ratio
  PulseGrid pulse;
  OptimizationConfig optimization;
  PulsePolSection pulsepol;
  ensemble::NuclearParams nuclear;
  int noise_realizations = 4;
  SweepConfig sweep;
  FidelityScanConfig scan;
  std::string output = "out";
  std::uint64_t seed = 1;
  int threads = 1;

  /// Cost spec for an X-axis rotation by theta.
  grape::CostSpec cost_spec(double theta) const;
  grape::OptimizeOptions optimize_options() const;
};

/// Throws ConfigError with a "path:line: message" text.
RunConfig load(const std::string& path);
RunConfig parse(const std::string& yaml_text, const std::string& source = "<string>");

}  // namespace cgrape::config
