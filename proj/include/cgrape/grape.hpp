#pragma once

// Chain-GRAPE: gradient ascent on the external cavity controls for a
// detuning-weighted gate fidelity, with the GRAPE gradient on the sampled
// intra-cavity field chained through the cavity response.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cgrape/cavity.hpp"
#include "cgrape/spin.hpp"

namespace cgrape::grape {

using cavity::CavityParams;
using cavity::ControlWaveform;
using cavity::IntraCavityWaveform;

struct Detuning {
  double delta = 0.0;   // MHz
  double weight = 0.0;  // w_delta
};

/// `points` equally spaced detunings on [-span, span] with uniform weights.
std::vector<Detuning> uniform_detuning_grid(double span, int points);

struct CostSpec {
  spin::Mat2 target = spin::Mat2::Identity();
  std::vector<Detuning> detunings{{0.0, 1.0}};
  double alpha = 1e-2;                // ringing penalty weight
  double fidelity_threshold = 1e-3;   // stop once 1 - Phi drops below this
  int max_iters = 2000;
  /// Termination additionally requires max_k |Omega_k^N| <= max_residual (MHz).
  /// Infinite by default.
  double max_residual = 1.0 / 0.0;

  /// Weights non-negative and summing to 1, target unitary, sane limits.
  void validate() const;
};

/// Phi = 1/4 sum_delta w_delta |<U(delta)|U_F>|^2 on an already propagated field.
double cost_on_field(const IntraCavityWaveform& field, const CostSpec& spec);

/// |<U(delta)|U_F>|^2 / 4 for a single detuning.
double gate_fidelity(const IntraCavityWaveform& field, const spin::Mat2& target, double delta);

/// Propagates `ctrl` through the cavity and evaluates Phi.
double cost(const ControlWaveform& ctrl, const CavityParams& params, const CostSpec& spec);

/// One gradient entry per intra-cavity slice and quadrature.
struct FieldGradient {
  std::vector<double> x;
  std::vector<double> y;
};

/// Control-space gradient, one entry per control step and quadrature.
struct ControlGradient {
  std::vector<double> x;
  std::vector<double> y;
};

/// Phi and dPhi/dOmega_k^j. Per-detuning terms are evaluated independently
/// (on up to `threads` workers) and reduced in the order of spec.detunings.
struct FieldGradientResult {
  double phi = 0.0;
  FieldGradient grad;
};

FieldGradientResult grad_phi_wrt_omega(const IntraCavityWaveform& field, const CostSpec& spec,
                                       int threads = 1);

/// Convenience overload that propagates `ctrl` first.
FieldGradientResult grad_phi_wrt_omega(const ControlWaveform& ctrl, const CavityParams& params,
                                       const CostSpec& spec, int threads = 1);

/// Subtracts alpha * Omega_k^N from the last entry of each quadrature.
void apply_ringing_penalty(FieldGradient& grad, double omega_final_x, double omega_final_y,
                           double alpha);

enum class KernelModel {
  exact,         // includes the partially elapsed control step
  full_step,     // full-step formula for every i <= ceil(j/r)
};

/// dPhi/df_k^i = sum_j dPhi/dOmega_k^j dOmega_k^j/df_k^i, summing only the
/// causal range j >= r*(i-1)+1.
ControlGradient chain_to_control(const FieldGradient& grad, const CavityParams& params,
                                 double dt, KernelModel model = KernelModel::exact);

/// Radial projection onto the closed unit disc.
std::pair<double, double> project_unit_disc(double fx, double fy);

struct AdamSettings {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  ControlWaveform controls;
  std::vector<double> first_moment;   // 2*n_f entries: x block then y block
  std::vector<double> second_moment;  // same layout
  long iteration = 0;
  AdamSettings settings;

  static OptimizerState start(ControlWaveform controls, AdamSettings settings = {});
};

/// One bias-corrected ADAM ascent step followed by the unit-disc projection.
/// `gradient` uses the moment layout (x block then y block).
OptimizerState adam_update(OptimizerState state, const std::vector<double>& gradient);

enum class Termination { threshold_reached, max_iterations, diverged };

std::string to_string(Termination t);

struct IterationRecord {
  double phi = 0.0;
  double residual_x = 0.0;  // Omega_x^N
  double residual_y = 0.0;  // Omega_y^N
  double best_objective = 0.0;  // best penalized objective seen so far
};

struct OptimizationReport {
  double final_phi = 0.0;         // Phi of the returned controls
  double final_residual_x = 0.0;  // Omega_x^N of the returned controls
  double final_residual_y = 0.0;
  std::vector<IterationRecord> trace;
  double wall_clock_seconds = 0.0;
  Termination termination = Termination::max_iterations;
  long iterations = 0;
  long divergence_iteration = -1;
};

struct OptimizeOptions {
  AdamSettings adam;
  KernelModel kernel = KernelModel::exact;
  int threads = 1;
};

struct OptimizeResult {
  ControlWaveform controls;  // best iterate by penalized objective
  OptimizationReport report;
};

/// Penalized objective Phi - alpha/2 * (Omega_x^N^2 + Omega_y^N^2); its
/// gradient is what the ringing correction at j = N ascends.
double penalized_objective(double phi, double residual_x, double residual_y, double alpha);

OptimizeResult optimize(const ControlWaveform& init, const CavityParams& params,
                        const CostSpec& spec, const OptimizeOptions& options = {});

/// Uniform random controls in [-amplitude, amplitude] per step and quadrature.
ControlWaveform random_ansatz(std::size_t steps, double delta_t, double amplitude,
                              std::uint64_t seed);

/// Three-segment (+, -, +) x-axis control whose ideal square-pulse angles
/// form the off-resonance compensating composite for `theta`
/// (2pi + theta/2 - k, 2pi - 2k, theta/2 - k with k = asin(sin(theta/2)/2)).
/// The segments are stretched at reduced amplitude to fill the window minus
/// one cavity half-rise time, leaving no free precession.
ControlWaveform composite_ansatz(double theta, std::size_t steps, double delta_t,
                                 const CavityParams& params);

/// (fx, fy) -> (-fy, fx): the same rotation about Y instead of X.
ControlWaveform transform_axis(const ControlWaveform& ctrl);

}  // namespace cgrape::grape
