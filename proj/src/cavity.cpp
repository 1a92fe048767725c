#include "cgrape/cavity.hpp"

#include <cmath>
#include <stdexcept>

#include "cgrape/io.hpp"

namespace cgrape::cavity {

void CavityParams::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("cavity: gamma must be > 0");
  if (!(omega_max > 0.0)) throw std::invalid_argument("cavity: omega_max must be > 0");
  if (r < 1) throw std::invalid_argument("cavity: r must be >= 1");
}

bool ControlWaveform::normalized(double tol) const {
  if (fx.size() != fy.size()) return false;
  for (std::size_t i = 0; i < fx.size(); ++i) {
    if (fx[i] * fx[i] + fy[i] * fy[i] > 1.0 + tol) return false;
  }
  return true;
}

IntraCavityWaveform propagate_from(const CavityParams& params, const ControlWaveform& ctrl,
                                   double omega0_x, double omega0_y) {
  params.validate();
  if (ctrl.fx.size() != ctrl.fy.size()) {
    throw std::invalid_argument("propagate: quadratures differ in length");
  }
  IntraCavityWaveform out;
  out.dt = ctrl.delta_t / params.r;
  const std::size_t n = ctrl.size() * static_cast<std::size_t>(params.r);
  out.omega_x.resize(n);
  out.omega_y.resize(n);

  const double decay = std::exp(-params.gamma * out.dt);
  const double gain = -std::expm1(-params.gamma * out.dt) * params.omega_max;
  double ox = omega0_x;
  double oy = omega0_y;
  std::size_t j = 0;
  for (std::size_t i = 0; i < ctrl.size(); ++i) {
    for (int s = 0; s < params.r; ++s, ++j) {
      ox = decay * ox + gain * ctrl.fx[i];
      oy = decay * oy + gain * ctrl.fy[i];
      out.omega_x[j] = ox;
      out.omega_y[j] = oy;
    }
  }
  return out;
}

IntraCavityWaveform propagate(const CavityParams& params, const ControlWaveform& ctrl) {
  return propagate_from(params, ctrl, 0.0, 0.0);
}

double response_kernel(const CavityParams& params, std::size_t j, std::size_t i, double dt) {
  const auto r = static_cast<std::size_t>(params.r);
  const std::size_t i_c = (j + r - 1) / r;
  if (i == 0 || i > i_c) return 0.0;
  // e^{-gamma j dt}(e^{gamma i Dt} - e^{gamma (i-1) Dt}), with the exponents
  // combined before evaluation to avoid overflow for long pulses.
  const double lag_end = (static_cast<double>(j) - static_cast<double>(i * r)) * dt;
  const double lag_start = lag_end + static_cast<double>(r) * dt;
  return params.omega_max *
         (std::exp(-params.gamma * lag_end) - std::exp(-params.gamma * lag_start));
}

double response_kernel_exact(const CavityParams& params, std::size_t j, std::size_t i,
                             double dt) {
  const auto r = static_cast<std::size_t>(params.r);
  const std::size_t i_f = j / r;
  const std::size_t i_c = (j + r - 1) / r;
  if (i == 0 || i > i_c) return 0.0;
  if (i <= i_f) return response_kernel(params, j, i, dt);
  const double elapsed = static_cast<double>(j - i_f * r) * dt;
  return -params.omega_max * std::expm1(-params.gamma * elapsed);
}

double standard_pulse_t2(double gamma, double t1) {
  return std::log(2.0 - std::exp(-gamma * t1)) / gamma;
}

StandardPulseResult standard_pulse(const CavityParams& params, double theta, double dt,
                                   spin::Axis axis, int sign) {
  params.validate();
  if (!(theta > 0.0) || theta > spin::kTwoPi / 2.0 + 1e-12) {
    throw std::domain_error("standard_pulse: theta must lie in (0, pi]");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("standard_pulse: dt must be > 0");
  if (axis == spin::Axis::z || (sign != 1 && sign != -1)) {
    throw std::invalid_argument("standard_pulse: axis must be x or y, sign +-1");
  }

  const double g = params.gamma;
  const double rate = spin::kTwoPi * params.omega_max;
  auto angle_error = [&](double t1) { return rate * (t1 - standard_pulse_t2(g, t1)) - theta; };

  double lo = theta / rate;
  double hi = lo + 10.0 / g;
  if (angle_error(lo) > 0.0 || angle_error(hi) < 0.0) {
    throw std::domain_error("standard_pulse: no root in search bracket");
  }
  double t1 = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    t1 = 0.5 * (lo + hi);
    const double err = angle_error(t1);
    if (std::abs(err) <= 1e-13 || hi - lo <= 1e-16) break;
    (err < 0.0 ? lo : hi) = t1;
  }

  StandardPulseResult result;
  result.pulse = {t1, standard_pulse_t2(g, t1), theta, axis, sign};
  const double t_end = t1 + result.pulse.t2;
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));

  // Effective constant value per step: the convex combination of the +1/-1
  // segments that reproduces the exact end-of-step field.
  const double norm = -std::expm1(-g * dt);
  auto segment_weight = [&](double step_end, double a, double b) {
    if (b <= a) return 0.0;
    return std::exp(-g * (step_end - b)) - std::exp(-g * (step_end - a));
  };
  ControlWaveform& ctrl = result.controls;
  ctrl.delta_t = dt;
  ctrl.fx.assign(steps, 0.0);
  ctrl.fy.assign(steps, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double a = static_cast<double>(k) * dt;
    const double b = a + dt;
    const double plus = segment_weight(b, std::max(a, 0.0), std::min(b, t1));
    const double minus = segment_weight(b, std::max(a, t1), std::min(b, t_end));
    const double f = sign * (plus - minus) / norm;
    (axis == spin::Axis::x ? ctrl.fx : ctrl.fy)[k] = f;
  }
  return result;
}

double ringing_tail_angle(double omega_final, const CavityParams& params) {
  return spin::kTwoPi * std::abs(omega_final) / params.gamma;
}

CavityParams with_unit_ratio(CavityParams params) {
  params.r = 1;
  return params;
}

void write_controls_csv(const std::string& path, const ControlWaveform& ctrl) {
  io::CsvWriter csv(path, {"t_us", "fx", "fy"});
  for (std::size_t i = 0; i < ctrl.size(); ++i) {
    csv.row({static_cast<double>(i) * ctrl.delta_t, ctrl.fx[i], ctrl.fy[i]});
  }
}

void write_intracavity_csv(const std::string& path, const IntraCavityWaveform& wave) {
  io::CsvWriter csv(path, {"t_us", "omega_x_MHz", "omega_y_MHz"});
  for (std::size_t j = 0; j < wave.size(); ++j) {
    csv.row({static_cast<double>(j) * wave.dt, wave.omega_x[j], wave.omega_y[j]});
  }
}

ControlWaveform read_controls_csv(const std::string& path) {
  const io::CsvTable table = io::read_csv(path);
  if (table.header != std::vector<std::string>{"t_us", "fx", "fy"}) {
    throw std::runtime_error(path + ": expected header t_us,fx,fy");
  }
  if (table.rows.size() < 2) {
    throw std::runtime_error(path + ": need at least two control steps");
  }
  ControlWaveform ctrl;
  for (const auto& row : table.rows) {
    ctrl.fx.push_back(row[1]);
    ctrl.fy.push_back(row[2]);
  }
  ctrl.delta_t = table.rows.back()[0] / static_cast<double>(table.rows.size() - 1);
  return ctrl;
}

}  // namespace cgrape::cavity
