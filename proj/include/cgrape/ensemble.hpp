#pragma once

// NV electron + one 13C nucleus driven by cavity-shaped PulsePol sequences.
//
// Rotating-frame Hamiltonian (MHz, evolution exp(-2*pi*i*H*t)):
//   H = (w_n + A_z/2) I(x)sz + 1/2 sz(x)(A_x sx + A_z sz)
//       + Omega_x/2 sx(x)I + Omega_y/2 sy(x)I + delta/2 sz(x)I
// Basis ordering is electron (x) nucleus; electron index 0 is |up>.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cgrape/cavity.hpp"
#include "cgrape/spin.hpp"

namespace cgrape::ensemble {

using cavity::CavityParams;
using cavity::ControlWaveform;
using cavity::IntraCavityWaveform;
using spin::Mat4;

inline constexpr double kCarbon13GyromagneticRatio = 10.7084;  // MHz/T

struct NuclearParams {
  double b_field = 0.015;  // T
  double a_x = 0.004;      // MHz
  double a_z = 0.0037;     // MHz
  double gyromagnetic_ratio = kCarbon13GyromagneticRatio;

  double omega_n() const { return gyromagnetic_ratio * b_field; }
};

Mat4 joint_hamiltonian(const NuclearParams& np, double delta, double omega_x, double omega_y);

struct JointState {
  Mat4 rho = Mat4::Zero();

  /// |up><up|_e (x) I/2.
  static JointState polarized_electron();

  /// tr(rho I(x)sz).
  double nuclear_polarization() const;
  double purity() const;
};

/// |up><up|_e (x) Tr_e(rho).
JointState reinitialize(const JointState& state);

/// rho -> U rho U^dagger.
JointState evolve(const Mat4& u, const JointState& state);

/// Slice-by-slice propagator of a sampled drive, one exp(-2*pi*i*H*dt) per slice.
Mat4 drive_propagator(const NuclearParams& np, double delta, const IntraCavityWaveform& field);

/// Field-free propagator of duration `duration` (single exact exponential).
Mat4 delay_propagator(const NuclearParams& np, double delta, double duration);

JointState evolve_segment(const JointState& state, const NuclearParams& np, double delta,
                          const IntraCavityWaveform& field);
JointState evolve_delay(const JointState& state, const NuclearParams& np, double delta,
                        double duration);

enum class PulseKind { x90 = 0, y90 = 1, x180 = 2, y180 = 3 };

std::string to_string(PulseKind kind);

/// External controls of one pulse and the slice ratio used to propagate them.
struct PulseControl {
  ControlWaveform controls;
  int r = 1;

  double duration() const { return controls.duration(); }
};

struct PulseLibrary {
  std::array<PulseControl, 4> pulses;

  const PulseControl& operator[](PulseKind kind) const {
    return pulses[static_cast<std::size_t>(kind)];
  }
  PulseControl& operator[](PulseKind kind) { return pulses[static_cast<std::size_t>(kind)]; }
};

/// Library from optimized X-axis pi and pi/2 controls; the Y pulses are the
/// axis-transformed copies.
PulseLibrary library_from_x_pulses(const ControlWaveform& x180, const ControlWaveform& x90, int r);

/// Two-segment standard pulses sampled at `dt` (r = 1).
PulseLibrary standard_library(const CavityParams& params, double dt);

/// Fraction of Omega_max below which a decaying residual field is dropped.
inline constexpr double kTailCutoff = 1e-6;

/// Time for the field left by `pulse` to decay below kTailCutoff * Omega_max.
double ringing_horizon(const PulseControl& pulse, const CavityParams& params);

struct PulsePolConfig {
  double tau = 0.0;  // us
  int blocks_per_sequence = 1;
  int sequences_per_cycle = 2;
  int cycles = 500;
  PulseLibrary library;
};

struct Segment {
  enum class Kind { pulse, delay };
  Kind kind = Kind::delay;
  PulseKind pulse = PulseKind::x90;
  double duration = 0.0;  // us
};

using Schedule = std::vector<Segment>;

/// One PulsePol sequence: blocks_per_sequence repetitions of
///   (pi/2)_y - tau/4 - (pi)_x - tau/4 - (pi/2)_y (pi/2)_x - tau/4 - (pi)_y - tau/4 - (pi/2)_x
/// Delays are edge to edge, shortened by half of each neighbouring pulse so
/// that pulse centres sit tau/4 apart. Throws std::invalid_argument if
/// tau/4 is shorter than the longest pulse plus its ringing horizon.
Schedule build_pulsepol_schedule(const PulsePolConfig& cfg, const CavityParams& params);

double schedule_duration(const Schedule& schedule);

struct NoiseModel {
  double sigma = 0.0;
  int realizations = 1;
  std::uint64_t seed = 0;
};

/// f_k -> f_k (1 + sigma*eps) with an independent unit normal eps per step
/// and quadrature, then projected onto the unit disc. Deterministic in
/// (noise.seed, draw_index).
ControlWaveform noise_inject(const ControlWaveform& ctrl, const NoiseModel& noise,
                             std::uint64_t draw_index);

/// Deterministic 64-bit mixing of two keys (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Per-cycle <sz_n>, averaged over noise realizations. Each cycle evolves
/// sequences_per_cycle sequences from an empty cavity and then reinitializes
/// the electron.
std::vector<double> run_protocol(const PulsePolConfig& cfg, const NuclearParams& np,
                                 double delta, const NoiseModel& noise,
                                 const CavityParams& params);

/// |<sz_n>| after one noise-free cycle at the given tau.
double cycle_transfer(const PulsePolConfig& cfg, const NuclearParams& np,
                      const CavityParams& params, double tau, double delta = 0.0);

/// Third-harmonic PulsePol spacing 3 / (2 f_n), with the nuclear precession
/// frequency f_n = 2 (w_n + A_z/2) of the Hamiltonian above.
double resonance_guess(const NuclearParams& np);

struct ResonanceScan {
  double tau_star = 0.0;
  double transfer = 0.0;
  std::vector<std::pair<double, double>> samples;  // (tau, transfer)
};

/// Grid scan of cycle_transfer over [tau_lo, tau_hi] followed by a
/// golden-section refinement around the best grid point. Throws
/// std::runtime_error if the best grid point lies on the range boundary.
ResonanceScan resonance_scan(const PulsePolConfig& cfg, const NuclearParams& np,
                             const CavityParams& params, double tau_lo, double tau_hi,
                             int points);

struct SweepResult {
  std::vector<double> deltas;
  std::vector<double> sigmas;
  /// curves[d * sigmas.size() + s] is the per-cycle polarization of cell (d, s).
  std::vector<std::vector<double>> curves;

  double final_polarization(std::size_t d, std::size_t s) const {
    return curves[d * sigmas.size() + s].back();
  }
};

/// One run_protocol per (delta, sigma) cell; cell k uses seed
/// mix_seed(noise.seed, k). Cells are distributed over `threads` workers.
SweepResult sweep_map(const std::vector<double>& deltas, const std::vector<double>& sigmas,
                      const PulsePolConfig& cfg, const NuclearParams& np,
                      const CavityParams& params, const NoiseModel& noise, int threads = 1);

/// Unweighted per-cycle mean over cells with |delta| <= delta_max and
/// |sigma| <= sigma_max. With `magnitude` the cell curves enter as |<sz_n>|.
std::vector<double> average_polarization_curve(const SweepResult& sweep, double delta_max,
                                               double sigma_max, bool magnitude = false);

void write_map_csv(const std::string& path, const SweepResult& sweep);
void write_curve_csv(const std::string& path, const std::vector<double>& curve);

}  // namespace cgrape::ensemble
