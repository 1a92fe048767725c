#include "cgrape/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cgrape/io.hpp"

namespace cgrape::commands {

namespace fs = std::filesystem;
using cavity::ControlWaveform;
using ensemble::PulseKind;
using nlohmann::ordered_json;

namespace {

constexpr double kPi = spin::kTwoPi / 2.0;

struct XPulse {
  PulseKind x;
  PulseKind y;
  double theta;
};

constexpr XPulse kXPulses[] = {
    {PulseKind::x180, PulseKind::y180, kPi},
    {PulseKind::x90, PulseKind::y90, kPi / 2.0},
};

std::string artifact(const config::RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output) / name).string();
}

void ensure_output_dir(const config::RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + cfg.output);
}

void write_json(const std::string& path, const ordered_json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
}

ordered_json config_summary(const config::RunConfig& cfg) {
  ordered_json j;
  j["cavity"] = {{"gamma_MHz", cfg.cavity.gamma},
                 {"omega_max_MHz", cfg.cavity.omega_max},
                 {"ratio", cfg.cavity.r}};
  j["pulse"] = {{"duration_us", cfg.pulse.duration},
                {"steps", cfg.pulse.steps},
                {"control_steps", cfg.pulse.control_steps()}};
  const auto& o = cfg.optimization;
  j["optimization"] = {{"detuning_span_MHz", o.detuning_span},
                       {"detuning_points", o.detuning_points},
                       {"alpha", o.alpha},
                       {"fidelity_threshold", o.fidelity_threshold},
                       {"max_iters", o.max_iters},
                       {"max_residual_MHz", o.max_residual},
                       {"learning_rate", o.learning_rate},
                       {"init", o.init},
                       {"init_amplitude", o.init_amplitude}};
  j["seed"] = cfg.seed;
  return j;
}

void write_pulse_artifacts(const config::RunConfig& cfg, PulseKind kind,
                           const ControlWaveform& controls, const grape::OptimizeResult& run,
                           double theta, bool derived) {
  const std::string stem = ensemble::to_string(kind);
  cavity::write_controls_csv(artifact(cfg, stem + "_controls.csv"), controls);
  cavity::write_intracavity_csv(artifact(cfg, stem + "_intracavity.csv"),
                                cavity::propagate(cfg.cavity, controls));

  io::CsvWriter trace(artifact(cfg, stem + "_trace.csv"),
                      {"iter", "phi", "residual_x", "residual_y"});
  for (std::size_t k = 0; k < run.report.trace.size(); ++k) {
    const auto& rec = run.report.trace[k];
    // the Y pulse shares the X run; its residuals are the rotated pair
    const double rx = derived ? -rec.residual_y : rec.residual_x;
    const double ry = derived ? rec.residual_x : rec.residual_y;
    trace.row({static_cast<double>(k + 1), rec.phi, rx, ry});
  }

  ordered_json meta = config_summary(cfg);
  meta["pulse_type"] = stem;
  meta["theta_rad"] = theta;
  meta["axis"] = (kind == PulseKind::x180 || kind == PulseKind::x90) ? "x" : "y";
  meta["derived_from"] = derived ? ensemble::to_string(kind == PulseKind::y180 ? PulseKind::x180
                                                                               : PulseKind::x90)
                                 : "";
  meta["final_phi"] = run.report.final_phi;
  meta["final_residual_x_MHz"] =
      derived ? -run.report.final_residual_y : run.report.final_residual_x;
  meta["final_residual_y_MHz"] =
      derived ? run.report.final_residual_x : run.report.final_residual_y;
  meta["termination"] = grape::to_string(run.report.termination);
  meta["iterations"] = run.report.iterations;
  meta["wall_clock_s"] = run.report.wall_clock_seconds;
  write_json(artifact(cfg, stem + "_meta.json"), meta);
}

}  // namespace

void apply_overrides(config::RunConfig& cfg, const Overrides& overrides) {
  if (overrides.out) cfg.output = *overrides.out;
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.threads) {
    if (*overrides.threads < 1) throw config::ConfigError("--threads must be >= 1");
    cfg.threads = *overrides.threads;
  }
  if (overrides.tau) {
    if (!(*overrides.tau > 0.0)) throw config::ConfigError("--tau must be positive");
    cfg.pulsepol.tau = *overrides.tau;
  }
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw std::invalid_argument("linspace: need at least one point");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] = n == 1 ? lo : lo + (hi - lo) * k / (n - 1);
  }
  return out;
}

ControlWaveform initial_controls(const config::RunConfig& cfg, double theta) {
  const std::size_t steps = cfg.pulse.control_steps();
  if (cfg.optimization.init == "random") {
    // per-angle stream so the two X pulses start from different draws
    const auto stream = static_cast<std::uint64_t>(std::lround(theta * 1e6));
    return grape::random_ansatz(steps, cfg.pulse.delta_t(), cfg.optimization.init_amplitude,
                                ensemble::mix_seed(cfg.seed, stream));
  }
  return grape::composite_ansatz(theta, steps, cfg.pulse.delta_t(), cfg.cavity);
}

grape::OptimizeResult optimize_x_pulse(const config::RunConfig& cfg, double theta) {
  return grape::optimize(initial_controls(cfg, theta), cfg.cavity, cfg.cost_spec(theta),
                         cfg.optimize_options());
}

ensemble::PulseLibrary load_optimized_library(const config::RunConfig& cfg,
                                              const std::string& dir) {
  ensemble::PulseLibrary lib;
  for (PulseKind kind : {PulseKind::x90, PulseKind::y90, PulseKind::x180, PulseKind::y180}) {
    const std::string path = (fs::path(dir) / (ensemble::to_string(kind) + "_controls.csv")).string();
    if (!fs::exists(path)) {
      throw std::runtime_error("missing pulse artifact " + path + " (run 'optimize' first)");
    }
    lib[kind] = {cavity::read_controls_csv(path), cfg.cavity.r};
  }
  return lib;
}

ensemble::PulseLibrary standard_library(const config::RunConfig& cfg) {
  return ensemble::standard_library(cfg.cavity, cfg.pulse.dt());
}

std::vector<double> sweep_deltas(const config::RunConfig& cfg) {
  return linspace(-cfg.sweep.delta_max, cfg.sweep.delta_max, cfg.sweep.delta_points);
}

std::vector<double> sweep_sigmas(const config::RunConfig& cfg) {
  return linspace(0.0, cfg.sweep.sigma_max, cfg.sweep.sigma_points);
}

PulsePolComparison compare_pulsepol(const config::RunConfig& cfg,
                                    const ensemble::PulseLibrary& optimized) {
  ensemble::PulsePolConfig pp;
  pp.blocks_per_sequence = cfg.pulsepol.blocks_per_sequence;
  pp.sequences_per_cycle = cfg.pulsepol.sequences_per_cycle;
  pp.cycles = cfg.pulsepol.cycles;
  pp.library = optimized;

  PulsePolComparison out;
  if (cfg.pulsepol.tau) {
    out.tau = *cfg.pulsepol.tau;
  } else {
    const double guess = ensemble::resonance_guess(cfg.nuclear);
    const auto scan = ensemble::resonance_scan(pp, cfg.nuclear, cfg.cavity,
                                               cfg.pulsepol.tau_scan.lo_factor * guess,
                                               cfg.pulsepol.tau_scan.hi_factor * guess,
                                               cfg.pulsepol.tau_scan.points);
    out.tau = scan.tau_star;
    out.tau_scanned = true;
  }
  pp.tau = out.tau;

  const auto deltas = sweep_deltas(cfg);
  const auto sigmas = sweep_sigmas(cfg);
  const ensemble::NoiseModel noise{0.0, cfg.noise_realizations, cfg.seed};
  out.optimized = ensemble::sweep_map(deltas, sigmas, pp, cfg.nuclear, cfg.cavity, noise,
                                      cfg.threads);
  ensemble::PulsePolConfig standard = pp;
  standard.library = standard_library(cfg);
  out.standard = ensemble::sweep_map(deltas, sigmas, standard, cfg.nuclear, cfg.cavity, noise,
                                     cfg.threads);
  out.optimized_curve = ensemble::average_polarization_curve(
      out.optimized, cfg.sweep.region_delta, cfg.sweep.region_sigma, true);
  out.standard_curve = ensemble::average_polarization_curve(
      out.standard, cfg.sweep.region_delta, cfg.sweep.region_sigma, true);
  return out;
}

int cmd_optimize(const config::RunConfig& cfg, std::ostream& log) {
  ensure_output_dir(cfg);
  bool converged = true;
  for (const XPulse& p : kXPulses) {
    log << "optimizing " << ensemble::to_string(p.x) << " (" << cfg.pulse.control_steps()
        << " control steps, " << cfg.optimization.detuning_points << " detunings)\n";
    const grape::OptimizeResult run = optimize_x_pulse(cfg, p.theta);
    log << "  phi = " << io::format_number(run.report.final_phi)
        << ", residual = (" << io::format_number(run.report.final_residual_x) << ", "
        << io::format_number(run.report.final_residual_y) << ") MHz, "
        << grape::to_string(run.report.termination) << " after " << run.report.iterations
        << " iterations\n";
    converged = converged && run.report.termination == grape::Termination::threshold_reached;
    write_pulse_artifacts(cfg, p.x, run.controls, run, p.theta, false);
    write_pulse_artifacts(cfg, p.y, grape::transform_axis(run.controls), run, p.theta, true);
  }
  return converged ? kExitOk : kExitNotConverged;
}

int cmd_scan(const config::RunConfig& cfg, const std::string& controls_dir, std::ostream& log) {
  ensure_output_dir(cfg);
  const ensemble::PulseLibrary optimized = load_optimized_library(cfg, controls_dir);
  const ensemble::PulseLibrary standard = standard_library(cfg);
  const auto field = [&](const ensemble::PulseControl& pulse) {
    cavity::CavityParams params = cfg.cavity;
    params.r = pulse.r;
    return cavity::propagate(params, pulse.controls);
  };
  const auto opt_pi = field(optimized[PulseKind::x180]);
  const auto opt_half = field(optimized[PulseKind::x90]);
  const auto std_pi = field(standard[PulseKind::x180]);
  const auto std_half = field(standard[PulseKind::x90]);
  const spin::Mat2 u_pi = spin::rotation(spin::Axis::x, kPi);
  const spin::Mat2 u_half = spin::rotation(spin::Axis::x, kPi / 2.0);

  const std::string path = artifact(cfg, "fidelity_scan.csv");
  io::CsvWriter out(path, {"delta_MHz", "opt_pi", "opt_pi2", "std_pi", "std_pi2"});
  for (double delta : linspace(-cfg.scan.delta_max, cfg.scan.delta_max, cfg.scan.delta_points)) {
    out.row({delta, grape::gate_fidelity(opt_pi, u_pi, delta),
             grape::gate_fidelity(opt_half, u_half, delta),
             grape::gate_fidelity(std_pi, u_pi, delta),
             grape::gate_fidelity(std_half, u_half, delta)});
  }
  log << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_pulsepol(const config::RunConfig& cfg, const std::string& controls_dir,
                 std::ostream& log) {
  ensure_output_dir(cfg);
  if (cfg.pulsepol.cycles >= 500) {
    log << "warning: " << cfg.pulsepol.cycles
        << " cycles per cell; expect a run time of hours on a single core\n";
  }
  const ensemble::PulseLibrary optimized = load_optimized_library(cfg, controls_dir);
  const PulsePolComparison cmp = compare_pulsepol(cfg, optimized);
  log << "tau = " << io::format_number(cmp.tau) << " us"
      << (cmp.tau_scanned ? " (resonance scan)" : " (override)") << "\n";

  ensemble::write_map_csv(artifact(cfg, "map_optimized.csv"), cmp.optimized);
  ensemble::write_map_csv(artifact(cfg, "map_standard.csv"), cmp.standard);
  ensemble::write_curve_csv(artifact(cfg, "curve_optimized.csv"), cmp.optimized_curve);
  ensemble::write_curve_csv(artifact(cfg, "curve_standard.csv"), cmp.standard_curve);

  ordered_json meta = config_summary(cfg);
  meta["tau_us"] = cmp.tau;
  meta["tau_scanned"] = cmp.tau_scanned;
  meta["cycles"] = cfg.pulsepol.cycles;
  meta["blocks_per_sequence"] = cfg.pulsepol.blocks_per_sequence;
  meta["sequences_per_cycle"] = cfg.pulsepol.sequences_per_cycle;
  meta["noise_realizations"] = cfg.noise_realizations;
  meta["final_region_mean_optimized"] = cmp.optimized_curve.back();
  meta["final_region_mean_standard"] = cmp.standard_curve.back();
  write_json(artifact(cfg, "pulsepol_meta.json"), meta);
  log << "final region mean |<sz_n>|: optimized "
      << io::format_number(cmp.optimized_curve.back()) << ", standard "
      << io::format_number(cmp.standard_curve.back()) << "\n";
  return kExitOk;
}

int cmd_standard(const config::RunConfig& cfg, double theta, std::ostream& log) {
  ensure_output_dir(cfg);
  const auto result = cavity::standard_pulse(cfg.cavity, theta, cfg.pulse.dt());
  cavity::write_controls_csv(artifact(cfg, "standard_controls.csv"), result.controls);
  cavity::write_intracavity_csv(
      artifact(cfg, "standard_intracavity.csv"),
      cavity::propagate(cavity::with_unit_ratio(cfg.cavity), result.controls));
  log << "t1 = " << io::format_number(result.pulse.t1)
      << " us, t2 = " << io::format_number(result.pulse.t2) << " us\n";
  return kExitOk;
}

}  // namespace cgrape::commands
