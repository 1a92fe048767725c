#include "cgrape/grape.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace cgrape::grape {

using spin::cplx;
using spin::Mat2;

std::vector<Detuning> uniform_detuning_grid(double span, int points) {
  if (points < 1) throw std::invalid_argument("detuning grid needs at least one point");
  std::vector<Detuning> grid(static_cast<std::size_t>(points));
  const double w = 1.0 / points;
  for (int k = 0; k < points; ++k) {
    const double delta = points == 1 ? 0.0 : -span + 2.0 * span * k / (points - 1);
    grid[static_cast<std::size_t>(k)] = {delta, w};
  }
  return grid;
}

void CostSpec::validate() const {
  if (detunings.empty()) throw std::invalid_argument("cost: empty detuning grid");
  double total = 0.0;
  for (const auto& d : detunings) {
    if (!(d.weight >= 0.0)) throw std::invalid_argument("cost: negative detuning weight");
    total += d.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("cost: detuning weights must sum to 1");
  }
  if (spin::unitarity_error(target) > 1e-12) {
    throw std::invalid_argument("cost: target is not unitary");
  }
  if (!(fidelity_threshold > 0.0 && fidelity_threshold < 1.0)) {
    throw std::invalid_argument("cost: fidelity_threshold must lie in (0, 1)");
  }
  if (max_iters < 1) throw std::invalid_argument("cost: max_iters must be >= 1");
  if (!(alpha >= 0.0)) throw std::invalid_argument("cost: alpha must be >= 0");
}

namespace {

Mat2 evolve(const IntraCavityWaveform& field, double delta) {
  Mat2 u = Mat2::Identity();
  for (std::size_t j = 0; j < field.size(); ++j) {
    u = spin::step_unitary({delta, field.omega_x[j], field.omega_y[j], field.dt}) * u;
  }
  return u;
}

// tr(a * b) for 2x2 matrices
cplx trace_product(const Mat2& a, const Mat2& b) {
  return a(0, 0) * b(0, 0) + a(0, 1) * b(1, 0) + a(1, 0) * b(0, 1) + a(1, 1) * b(1, 1);
}

struct DetuningTerm {
  double fidelity = 0.0;  // |<U|U_F>|^2 / 4
  std::vector<double> gx;
  std::vector<double> gy;
};

DetuningTerm detuning_term(const IntraCavityWaveform& field, const Mat2& target,
                           double delta) {
  const std::size_t n = field.size();
  std::vector<spin::StepJet> jets(n);
  std::vector<Mat2> before(n);  // U_{j-1} ... U_1
  Mat2 x = Mat2::Identity();
  for (std::size_t j = 0; j < n; ++j) {
    jets[j] = spin::step_unitary_jet({delta, field.omega_x[j], field.omega_y[j], field.dt});
    before[j] = x;
    x = jets[j].u * x;
  }
  const Mat2 target_dag = target.adjoint();
  const cplx overlap = trace_product(target_dag, x);

  DetuningTerm term;
  term.fidelity = std::norm(overlap) / 4.0;
  term.gx.resize(n);
  term.gy.resize(n);
  // after = U_F^dagger U_N ... U_{j+1}
  Mat2 after = target_dag;
  const cplx conj_overlap = std::conj(overlap);
  for (std::size_t jj = n; jj-- > 0;) {
    const Mat2 sandwich = before[jj] * after;
    term.gx[jj] = 0.5 * std::real(conj_overlap * trace_product(sandwich, jets[jj].du_domega_x));
    term.gy[jj] = 0.5 * std::real(conj_overlap * trace_product(sandwich, jets[jj].du_domega_y));
    after = after * jets[jj].u;
  }
  return term;
}

template <typename Fn>
void run_indexed(std::size_t count, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t k = w; k < count; k += workers) fn(k);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

double gate_fidelity(const IntraCavityWaveform& field, const Mat2& target, double delta) {
  return std::norm(spin::hs_overlap(evolve(field, delta), target)) / 4.0;
}

double cost_on_field(const IntraCavityWaveform& field, const CostSpec& spec) {
  double phi = 0.0;
  for (const auto& d : spec.detunings) {
    phi += d.weight * gate_fidelity(field, spec.target, d.delta);
  }
  return phi;
}

double cost(const ControlWaveform& ctrl, const CavityParams& params, const CostSpec& spec) {
  return cost_on_field(cavity::propagate(params, ctrl), spec);
}

FieldGradientResult grad_phi_wrt_omega(const IntraCavityWaveform& field, const CostSpec& spec,
                                       int threads) {
  std::vector<DetuningTerm> terms(spec.detunings.size());
  run_indexed(terms.size(), threads, [&](std::size_t k) {
    terms[k] = detuning_term(field, spec.target, spec.detunings[k].delta);
  });

  FieldGradientResult result;
  result.grad.x.assign(field.size(), 0.0);
  result.grad.y.assign(field.size(), 0.0);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const double w = spec.detunings[k].weight;
    result.phi += w * terms[k].fidelity;
    for (std::size_t j = 0; j < field.size(); ++j) {
      result.grad.x[j] += w * terms[k].gx[j];
      result.grad.y[j] += w * terms[k].gy[j];
    }
  }
  return result;
}

FieldGradientResult grad_phi_wrt_omega(const ControlWaveform& ctrl, const CavityParams& params,
                                       const CostSpec& spec, int threads) {
  return grad_phi_wrt_omega(cavity::propagate(params, ctrl), spec, threads);
}

void apply_ringing_penalty(FieldGradient& grad, double omega_final_x, double omega_final_y,
                           double alpha) {
  if (!grad.x.empty()) grad.x.back() -= alpha * omega_final_x;
  if (!grad.y.empty()) grad.y.back() -= alpha * omega_final_y;
}

ControlGradient chain_to_control(const FieldGradient& grad, const CavityParams& params,
                                 double dt, KernelModel model) {
  const auto r = static_cast<std::size_t>(params.r);
  const std::size_t n = grad.x.size();
  const std::size_t n_f = (n + r - 1) / r;
  ControlGradient out;
  out.x.assign(n_f, 0.0);
  out.y.assign(n_f, 0.0);
  for (std::size_t i = 1; i <= n_f; ++i) {
    double gx = 0.0;
    double gy = 0.0;
    for (std::size_t j = r * (i - 1) + 1; j <= n; ++j) {
      const double k = model == KernelModel::exact
                           ? cavity::response_kernel_exact(params, j, i, dt)
                           : cavity::response_kernel(params, j, i, dt);
      gx += grad.x[j - 1] * k;
      gy += grad.y[j - 1] * k;
    }
    out.x[i - 1] = gx;
    out.y[i - 1] = gy;
  }
  return out;
}

std::pair<double, double> project_unit_disc(double fx, double fy) {
  const double norm2 = fx * fx + fy * fy;
  if (norm2 <= 1.0) return {fx, fy};
  const double norm = std::sqrt(norm2);
  return {fx / norm, fy / norm};
}

OptimizerState OptimizerState::start(ControlWaveform controls, AdamSettings settings) {
  OptimizerState s;
  const std::size_t params = 2 * controls.size();
  s.controls = std::move(controls);
  s.first_moment.assign(params, 0.0);
  s.second_moment.assign(params, 0.0);
  s.settings = settings;
  return s;
}

OptimizerState adam_update(OptimizerState state, const std::vector<double>& gradient) {
  const std::size_t n_f = state.controls.size();
  if (gradient.size() != 2 * n_f || state.first_moment.size() != 2 * n_f ||
      state.second_moment.size() != 2 * n_f) {
    throw std::invalid_argument("adam_update: gradient must have 2*n_f entries");
  }
  const AdamSettings& a = state.settings;
  ++state.iteration;
  const double t = static_cast<double>(state.iteration);
  const double bias1 = 1.0 - std::pow(a.beta1, t);
  const double bias2 = 1.0 - std::pow(a.beta2, t);
  for (std::size_t p = 0; p < 2 * n_f; ++p) {
    const double g = gradient[p];
    double& m = state.first_moment[p];
    double& v = state.second_moment[p];
    m = a.beta1 * m + (1.0 - a.beta1) * g;
    v = a.beta2 * v + (1.0 - a.beta2) * g * g;
    const double step = a.learning_rate * (m / bias1) / (std::sqrt(v / bias2) + a.epsilon);
    double& param = p < n_f ? state.controls.fx[p] : state.controls.fy[p - n_f];
    param += step;
  }
  for (std::size_t i = 0; i < n_f; ++i) {
    std::tie(state.controls.fx[i], state.controls.fy[i]) =
        project_unit_disc(state.controls.fx[i], state.controls.fy[i]);
  }
  return state;
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::threshold_reached:
      return "threshold_reached";
    case Termination::max_iterations:
      return "max_iterations";
    case Termination::diverged:
      return "diverged";
  }
  return "unknown";
}

double penalized_objective(double phi, double residual_x, double residual_y, double alpha) {
  return phi - 0.5 * alpha * (residual_x * residual_x + residual_y * residual_y);
}

OptimizeResult optimize(const ControlWaveform& init, const CavityParams& params,
                        const CostSpec& spec, const OptimizeOptions& options) {
  params.validate();
  spec.validate();
  if (init.size() == 0 || !init.normalized()) {
    throw std::invalid_argument("optimize: initial controls must be non-empty and normalized");
  }
  const auto started = std::chrono::steady_clock::now();

  OptimizeResult result;
  OptimizationReport& report = result.report;
  OptimizerState state = OptimizerState::start(init, options.adam);
  double best = -std::numeric_limits<double>::infinity();
  result.controls = init;

  for (int it = 0; it < spec.max_iters; ++it) {
    const IntraCavityWaveform field = cavity::propagate(params, state.controls);
    FieldGradientResult g = grad_phi_wrt_omega(field, spec, options.threads);
    const double rx = field.omega_x.back();
    const double ry = field.omega_y.back();
    report.iterations = it + 1;
    if (!std::isfinite(g.phi)) {
      report.termination = Termination::diverged;
      report.divergence_iteration = it;
      break;
    }
    const double objective = penalized_objective(g.phi, rx, ry, spec.alpha);
    if (objective > best) {
      best = objective;
      result.controls = state.controls;
      report.final_phi = g.phi;
      report.final_residual_x = rx;
      report.final_residual_y = ry;
    }
    report.trace.push_back({g.phi, rx, ry, best});
    if (1.0 - g.phi < spec.fidelity_threshold &&
        std::max(std::abs(rx), std::abs(ry)) <= spec.max_residual) {
      report.termination = Termination::threshold_reached;
      break;
    }

    apply_ringing_penalty(g.grad, rx, ry, spec.alpha);
    const ControlGradient cg = chain_to_control(g.grad, params, field.dt, options.kernel);
    std::vector<double> flat(cg.x);
    flat.insert(flat.end(), cg.y.begin(), cg.y.end());
    state = adam_update(std::move(state), flat);
  }

  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

ControlWaveform random_ansatz(std::size_t steps, double delta_t, double amplitude,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  ControlWaveform ctrl;
  ctrl.delta_t = delta_t;
  ctrl.fx.resize(steps);
  ctrl.fy.resize(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    ctrl.fx[i] = dist(rng);
    ctrl.fy[i] = dist(rng);
    std::tie(ctrl.fx[i], ctrl.fy[i]) = project_unit_disc(ctrl.fx[i], ctrl.fy[i]);
  }
  return ctrl;
}

ControlWaveform composite_ansatz(double theta, std::size_t steps, double delta_t,
                                 const CavityParams& params) {
  params.validate();
  const double k = std::asin(std::sin(theta / 2.0) / 2.0);
  const double two_pi = spin::kTwoPi;
  const double angles[3] = {two_pi + theta / 2.0 - k, two_pi - 2.0 * k, theta / 2.0 - k};
  const double rate = two_pi * params.omega_max;
  const double full_time = (angles[0] + angles[1] + angles[2]) / rate;
  const double window = static_cast<double>(steps) * delta_t - std::log(2.0) / params.gamma;
  const double amplitude = window > full_time ? full_time / window : 1.0;

  ControlWaveform ctrl;
  ctrl.delta_t = delta_t;
  ctrl.fx.assign(steps, 0.0);
  ctrl.fy.assign(steps, 0.0);
  const double b1 = angles[0] / (rate * amplitude);
  const double b2 = b1 + angles[1] / (rate * amplitude);
  const double b3 = b2 + angles[2] / (rate * amplitude);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = (static_cast<double>(i) + 0.5) * delta_t;
    if (t < b1) {
      ctrl.fx[i] = amplitude;
    } else if (t < b2) {
      ctrl.fx[i] = -amplitude;
    } else if (t < b3) {
      ctrl.fx[i] = amplitude;
    }
  }
  return ctrl;
}

ControlWaveform transform_axis(const ControlWaveform& ctrl) {
  ControlWaveform out;
  out.delta_t = ctrl.delta_t;
  out.fx.resize(ctrl.size());
  out.fy.resize(ctrl.size());
  for (std::size_t i = 0; i < ctrl.size(); ++i) {
    out.fx[i] = -ctrl.fy[i];
    out.fy[i] = ctrl.fx[i];
  }
  return out;
}

}  // namespace cgrape::grape
