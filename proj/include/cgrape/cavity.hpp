#pragma once

// First-order cavity response: dOmega_k/dt = gamma*Omega_max*f_k - gamma*Omega_k
// for each drive quadrature k in {x, y}, with piecewise-constant external
// control f_k and zero initial field.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cgrape/spin.hpp"

namespace cgrape::cavity {

struct CavityParams {
  double gamma = 20.0;      // ringing factor, MHz
  double omega_max = 24.0;  // steady-state amplitude at |f| = 1, MHz
  int r = 10;               // intra-cavity slices per control step

  /// Throws std::invalid_argument on gamma <= 0, omega_max <= 0 or r < 1.
  void validate() const;
};

/// Normalized external control, one value per quadrature per step of delta_t.
struct ControlWaveform {
  std::vector<double> fx;
  std::vector<double> fy;
  double delta_t = 0.0;  // us

  std::size_t size() const { return fx.size(); }
  double duration() const { return static_cast<double>(size()) * delta_t; }
  /// fx^2 + fy^2 <= 1 + tol on every step, and both quadratures sized alike.
  bool normalized(double tol = 1e-12) const;
};

/// Sampled intra-cavity field; entry j holds Omega(j*dt) for j = 1..N and is
/// used as the constant field on slice j.
struct IntraCavityWaveform {
  std::vector<double> omega_x;
  std::vector<double> omega_y;
  double dt = 0.0;  // us

  std::size_t size() const { return omega_x.size(); }
  double duration() const { return static_cast<double>(size()) * dt; }
};

/// Exact piecewise-constant solution, computed by the one-step recursion
/// Omega <- e^{-gamma dt} Omega + (1 - e^{-gamma dt}) Omega_max f.
IntraCavityWaveform propagate(const CavityParams& params, const ControlWaveform& ctrl);

/// Same, starting from a non-zero field (omega0_x, omega0_y). Used to chain
/// pulses that sit back to back in a sequence.
IntraCavityWaveform propagate_from(const CavityParams& params, const ControlWaveform& ctrl,
                                   double omega0_x, double omega0_y);

/// dOmega^j/df^i with the full-step formula applied for every i <= ceil(j/r),
/// including the partially elapsed control step i = ceil(j/r). Indices are
/// 1-based; returns 0 for i > ceil(j/r).
double response_kernel(const CavityParams& params, std::size_t j, std::size_t i, double dt);

/// dOmega^j/df^i of the discretized solution, including the partial-step
/// branch for floor(j/r) < i = ceil(j/r).
double response_kernel_exact(const CavityParams& params, std::size_t j, std::size_t i,
                             double dt);

struct StandardPulse {
  double t1 = 0.0;  // positive drive duration, us
  double t2 = 0.0;  // negative (pi-dephased) drive duration, us
  double theta = 0.0;
  spin::Axis axis = spin::Axis::x;
  int sign = 1;
};

struct StandardPulseResult {
  StandardPulse pulse;
  /// Sampled at delta_t = dt and meant to be propagated with r = 1; the two
  /// switching instants fall inside single steps whose values are chosen so
  /// that the field on the dt grid equals the continuous solution.
  ControlWaveform controls;
};

/// Two-segment pulse (+1 for t1, -1 for t2) that rotates by theta and leaves
/// the cavity empty at t1 + t2. Throws std::domain_error if theta is out of
/// (0, pi] or the bisection bracket holds no root.
StandardPulseResult standard_pulse(const CavityParams& params, double theta, double dt,
                                   spin::Axis axis = spin::Axis::x, int sign = 1);

/// t2 that zeroes the field after driving at +1 for t1.
double standard_pulse_t2(double gamma, double t1);

/// Extra on-resonance rotation left by a residual field: 2*pi*|Omega_N|/gamma.
double ringing_tail_angle(double omega_final, const CavityParams& params);

/// The same parameters with r = 1, for controls already sampled at dt.
CavityParams with_unit_ratio(CavityParams params);

void write_controls_csv(const std::string& path, const ControlWaveform& ctrl);
void write_intracavity_csv(const std::string& path, const IntraCavityWaveform& wave);
/// Reads the `t_us,fx,fy` format back; delta_t is taken from the time column.
ControlWaveform read_controls_csv(const std::string& path);

}  // namespace cgrape::cavity
