#include "cgrape/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

#include "cgrape/grape.hpp"
#include "cgrape/io.hpp"

namespace cgrape::ensemble {

using spin::Axis;
using spin::cplx;
using spin::kron;
using spin::Mat2;
using spin::pauli;

namespace {

struct DriveOperators {
  Mat4 sx_e = kron(pauli(Axis::x), Mat2::Identity());
  Mat4 sy_e = kron(pauli(Axis::y), Mat2::Identity());
};

const DriveOperators& drive_operators() {
  static const DriveOperators ops;
  return ops;
}

Mat4 static_hamiltonian(const NuclearParams& np, double delta) {
  return joint_hamiltonian(np, delta, 0.0, 0.0);
}

CavityParams with_ratio(CavityParams params, int r) {
  params.r = r;
  return params;
}

// Everything needed to turn one cycle's pulse controls into a propagator.
class CyclePropagator {
 public:
  CyclePropagator(const PulsePolConfig& cfg, const NuclearParams& np, double delta,
                  const CavityParams& params)
      : cfg_(cfg), np_(np), delta_(delta), params_(params),
        h_static_(static_hamiltonian(np, delta)) {
    sequence_ = build_pulsepol_schedule(cfg, params);
    for (int s = 0; s < cfg.sequences_per_cycle; ++s) {
      cycle_.insert(cycle_.end(), sequence_.begin(), sequence_.end());
    }
    for (const auto& seg : cycle_) {
      if (seg.kind == Segment::Kind::pulse) ++pulses_per_cycle_;
    }
  }

  std::size_t pulses_per_cycle() const { return pulses_per_cycle_; }

  // `pick(p, kind)` returns the external controls of the p-th pulse.
  template <typename Pick>
  Mat4 propagator(Pick&& pick) {
    Mat4 u = Mat4::Identity();
    double ox = 0.0;
    double oy = 0.0;
    std::size_t p = 0;
    for (const auto& seg : cycle_) {
      if (seg.kind == Segment::Kind::pulse) {
        const PulseControl& pulse = cfg_.library[seg.pulse];
        const ControlWaveform& ctrl = pick(p++, seg.pulse);
        const IntraCavityWaveform field =
            cavity::propagate_from(with_ratio(params_, pulse.r), ctrl, ox, oy);
        u = slices(field) * u;
        ox = field.omega_x.back();
        oy = field.omega_y.back();
      } else {
        u = delay(seg.duration, ox, oy) * u;
      }
    }
    return u;
  }

 private:
  Mat4 slices(const IntraCavityWaveform& field) const {
    const auto& ops = drive_operators();
    const double scale = spin::kTwoPi * field.dt;
    Mat4 u = Mat4::Identity();
    for (std::size_t j = 0; j < field.size(); ++j) {
      const Mat4 h = h_static_ + (0.5 * field.omega_x[j]) * ops.sx_e +
                     (0.5 * field.omega_y[j]) * ops.sy_e;
      u = spin::expm_series(h, scale) * u;
    }
    return u;
  }

  // Free evolution, with the decaying residual field sliced at the control
  // step until it drops below the tail cutoff.
  Mat4 delay(double duration, double& ox, double& oy) {
    Mat4 u = Mat4::Identity();
    const double cutoff = kTailCutoff * params_.omega_max;
    const double h = tail_step();
    double remaining = duration;
    if (std::hypot(ox, oy) > cutoff) {
      IntraCavityWaveform tail;
      tail.dt = h;
      while (remaining > 1e-12 && std::hypot(ox, oy) > cutoff) {
        const double step = std::min(h, remaining);
        // slice-averaged amplitude of Omega0 e^{-gamma t}
        const double avg = -std::expm1(-params_.gamma * step) / (params_.gamma * step);
        const double decay = std::exp(-params_.gamma * step);
        if (step == h) {
          tail.omega_x.push_back(ox * avg);
          tail.omega_y.push_back(oy * avg);
        } else {
          IntraCavityWaveform last;
          last.dt = step;
          last.omega_x = {ox * avg};
          last.omega_y = {oy * avg};
          u = slices(tail) * u;
          tail.omega_x.clear();
          tail.omega_y.clear();
          u = slices(last) * u;
        }
        ox *= decay;
        oy *= decay;
        remaining -= step;
      }
      if (!tail.omega_x.empty()) u = slices(tail) * u;
    }
    if (std::hypot(ox, oy) <= cutoff) {
      ox = 0.0;
      oy = 0.0;
    }
    if (remaining > 1e-12) {
      u = cached_delay(remaining) * u;
    }
    return u;
  }

  double tail_step() const {
    double h = 0.0;
    for (const auto& pulse : cfg_.library.pulses) {
      h = std::max(h, pulse.controls.delta_t);
    }
    return h;
  }

  const Mat4& cached_delay(double duration) {
    auto it = delay_cache_.find(duration);
    if (it == delay_cache_.end()) {
      it = delay_cache_.emplace(duration, delay_propagator(np_, delta_, duration)).first;
    }
    return it->second;
  }

  const PulsePolConfig& cfg_;
  NuclearParams np_;
  double delta_;
  CavityParams params_;
  Mat4 h_static_;
  Schedule sequence_;
  Schedule cycle_;
  std::size_t pulses_per_cycle_ = 0;
  std::map<double, Mat4> delay_cache_;
};

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

Mat4 joint_hamiltonian(const NuclearParams& np, double delta, double omega_x, double omega_y) {
  const Mat2 id = Mat2::Identity();
  const Mat2 sx = pauli(Axis::x);
  const Mat2 sy = pauli(Axis::y);
  const Mat2 sz = pauli(Axis::z);
  Mat4 h = (np.omega_n() + 0.5 * np.a_z) * kron(id, sz);
  h += 0.5 * kron(sz, np.a_x * sx + np.a_z * sz);
  h += 0.5 * omega_x * kron(sx, id);
  h += 0.5 * omega_y * kron(sy, id);
  h += 0.5 * delta * kron(sz, id);
  return h;
}

JointState JointState::polarized_electron() {
  JointState s;
  s.rho(0, 0) = 0.5;
  s.rho(1, 1) = 0.5;
  return s;
}

double JointState::nuclear_polarization() const {
  return std::real(rho(0, 0) - rho(1, 1) + rho(2, 2) - rho(3, 3));
}

double JointState::purity() const { return std::real((rho * rho).trace()); }

JointState reinitialize(const JointState& state) {
  JointState out;
  out.rho.block<2, 2>(0, 0) = state.rho.block<2, 2>(0, 0) + state.rho.block<2, 2>(2, 2);
  return out;
}

JointState evolve(const Mat4& u, const JointState& state) {
  JointState out;
  out.rho = u * state.rho * u.adjoint();
  return out;
}

Mat4 drive_propagator(const NuclearParams& np, double delta, const IntraCavityWaveform& field) {
  const auto& ops = drive_operators();
  const Mat4 h0 = static_hamiltonian(np, delta);
  const double scale = spin::kTwoPi * field.dt;
  Mat4 u = Mat4::Identity();
  for (std::size_t j = 0; j < field.size(); ++j) {
    const Mat4 h = h0 + (0.5 * field.omega_x[j]) * ops.sx_e + (0.5 * field.omega_y[j]) * ops.sy_e;
    u = spin::expm_series(h, scale) * u;
  }
  return u;
}

Mat4 delay_propagator(const NuclearParams& np, double delta, double duration) {
  return spin::expm_hermitian(static_hamiltonian(np, delta), spin::kTwoPi * duration);
}

JointState evolve_segment(const JointState& state, const NuclearParams& np, double delta,
                          const IntraCavityWaveform& field) {
  return evolve(drive_propagator(np, delta, field), state);
}

JointState evolve_delay(const JointState& state, const NuclearParams& np, double delta,
                        double duration) {
  return evolve(delay_propagator(np, delta, duration), state);
}

std::string to_string(PulseKind kind) {
  switch (kind) {
    case PulseKind::x90:
      return "pi2_x";
    case PulseKind::y90:
      return "pi2_y";
    case PulseKind::x180:
      return "pi_x";
    case PulseKind::y180:
      return "pi_y";
  }
  return "unknown";
}

PulseLibrary library_from_x_pulses(const ControlWaveform& x180, const ControlWaveform& x90,
                                   int r) {
  PulseLibrary lib;
  lib[PulseKind::x180] = {x180, r};
  lib[PulseKind::x90] = {x90, r};
  lib[PulseKind::y180] = {grape::transform_axis(x180), r};
  lib[PulseKind::y90] = {grape::transform_axis(x90), r};
  return lib;
}

PulseLibrary standard_library(const CavityParams& params, double dt) {
  constexpr double pi = spin::kTwoPi / 2.0;
  PulseLibrary lib;
  lib[PulseKind::x180] = {cavity::standard_pulse(params, pi, dt, Axis::x).controls, 1};
  lib[PulseKind::x90] = {cavity::standard_pulse(params, pi / 2.0, dt, Axis::x).controls, 1};
  lib[PulseKind::y180] = {cavity::standard_pulse(params, pi, dt, Axis::y).controls, 1};
  lib[PulseKind::y90] = {cavity::standard_pulse(params, pi / 2.0, dt, Axis::y).controls, 1};
  return lib;
}

double ringing_horizon(const PulseControl& pulse, const CavityParams& params) {
  const IntraCavityWaveform field = cavity::propagate(with_ratio(params, pulse.r), pulse.controls);
  if (field.size() == 0) return 0.0;
  const double residual = std::hypot(field.omega_x.back(), field.omega_y.back());
  const double cutoff = kTailCutoff * params.omega_max;
  if (residual <= cutoff) return 0.0;
  return std::log(residual / cutoff) / params.gamma;
}

Schedule build_pulsepol_schedule(const PulsePolConfig& cfg, const CavityParams& params) {
  if (cfg.blocks_per_sequence < 1) {
    throw std::invalid_argument("pulsepol: blocks_per_sequence must be >= 1");
  }
  double longest = 0.0;
  double horizon = 0.0;
  for (const auto& pulse : cfg.library.pulses) {
    if (pulse.controls.size() == 0) {
      throw std::invalid_argument("pulsepol: pulse library is incomplete");
    }
    longest = std::max(longest, pulse.duration());
    horizon = std::max(horizon, ringing_horizon(pulse, params));
  }
  if (cfg.tau / 4.0 < longest + horizon) {
    throw std::invalid_argument("pulsepol: tau/4 = " + io::format_number(cfg.tau / 4.0) +
                                " us is shorter than the longest pulse plus its ringing "
                                "horizon (" + io::format_number(longest + horizon) + " us)");
  }

  auto pulse = [&](PulseKind k) {
    return Segment{Segment::Kind::pulse, k, cfg.library[k].duration()};
  };
  auto gap = [&](PulseKind left, PulseKind right) {
    const double d =
        cfg.tau / 4.0 - 0.5 * cfg.library[left].duration() - 0.5 * cfg.library[right].duration();
    return Segment{Segment::Kind::delay, PulseKind::x90, d};
  };
  using K = PulseKind;
  const Schedule block = {
      pulse(K::y90), gap(K::y90, K::x180), pulse(K::x180), gap(K::x180, K::y90), pulse(K::y90),
      pulse(K::x90), gap(K::x90, K::y180), pulse(K::y180), gap(K::y180, K::x90), pulse(K::x90),
  };
  Schedule out;
  for (int b = 0; b < cfg.blocks_per_sequence; ++b) {
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

double schedule_duration(const Schedule& schedule) {
  double total = 0.0;
  for (const auto& seg : schedule) total += seg.duration;
  return total;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ControlWaveform noise_inject(const ControlWaveform& ctrl, const NoiseModel& noise,
                             std::uint64_t draw_index) {
  if (noise.sigma == 0.0) return ctrl;
  std::mt19937_64 rng(mix_seed(noise.seed, draw_index));
  std::normal_distribution<double> eps(0.0, 1.0);
  ControlWaveform out = ctrl;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.fx[i] *= 1.0 + noise.sigma * eps(rng);
    out.fy[i] *= 1.0 + noise.sigma * eps(rng);
    std::tie(out.fx[i], out.fy[i]) = grape::project_unit_disc(out.fx[i], out.fy[i]);
  }
  return out;
}

std::vector<double> run_protocol(const PulsePolConfig& cfg, const NuclearParams& np,
                                 double delta, const NoiseModel& noise,
                                 const CavityParams& params) {
  if (noise.sigma < 0.0) throw std::invalid_argument("noise: sigma must be >= 0");
  if (cfg.cycles < 1 || cfg.sequences_per_cycle < 1) {
    throw std::invalid_argument("pulsepol: cycles and sequences_per_cycle must be >= 1");
  }
  CyclePropagator cycle(cfg, np, delta, params);
  const auto cycles = static_cast<std::size_t>(cfg.cycles);
  std::vector<double> mean(cycles, 0.0);

  const bool noiseless = noise.sigma == 0.0;
  const int realizations = noiseless ? 1 : std::max(noise.realizations, 1);
  Mat4 fixed = Mat4::Identity();
  if (noiseless) {
    fixed = cycle.propagator(
        [&](std::size_t, PulseKind kind) -> const ControlWaveform& {
          return cfg.library[kind].controls;
        });
  }

  for (int k = 0; k < realizations; ++k) {
    NoiseModel draw = noise;
    draw.seed = mix_seed(noise.seed, static_cast<std::uint64_t>(k));
    JointState state = JointState::polarized_electron();
    for (std::size_t c = 0; c < cycles; ++c) {
      Mat4 u = fixed;
      if (!noiseless) {
        ControlWaveform noisy;
        u = cycle.propagator([&](std::size_t p, PulseKind kind) -> const ControlWaveform& {
          noisy = noise_inject(cfg.library[kind].controls, draw,
                               c * cycle.pulses_per_cycle() + p);
          return noisy;
        });
      }
      state = reinitialize(evolve(u, state));
      mean[c] += state.nuclear_polarization();
    }
  }
  for (double& m : mean) m /= realizations;
  return mean;
}

double cycle_transfer(const PulsePolConfig& cfg, const NuclearParams& np,
                      const CavityParams& params, double tau, double delta) {
  PulsePolConfig one = cfg;
  one.tau = tau;
  one.cycles = 1;
  return std::abs(run_protocol(one, np, delta, NoiseModel{}, params).front());
}

double resonance_guess(const NuclearParams& np) {
  // the nuclear sz coefficient w_n + A_z/2 precesses at twice that frequency
  return 3.0 / (4.0 * (np.omega_n() + 0.5 * np.a_z));
}

ResonanceScan resonance_scan(const PulsePolConfig& cfg, const NuclearParams& np,
                             const CavityParams& params, double tau_lo, double tau_hi,
                             int points) {
  if (points < 3 || !(tau_hi > tau_lo)) {
    throw std::invalid_argument("resonance_scan: need tau_hi > tau_lo and >= 3 points");
  }
  ResonanceScan scan;
  std::size_t best = 0;
  for (int k = 0; k < points; ++k) {
    const double tau = tau_lo + (tau_hi - tau_lo) * k / (points - 1);
    scan.samples.emplace_back(tau, cycle_transfer(cfg, np, params, tau));
    if (scan.samples.back().second > scan.samples[best].second) best = scan.samples.size() - 1;
  }
  if (best == 0 || best + 1 == scan.samples.size()) {
    throw std::runtime_error("resonance_scan: no interior transfer maximum in [" +
                             io::format_number(tau_lo) + ", " + io::format_number(tau_hi) +
                             "] us");
  }

  // golden-section refinement between the neighbouring grid points
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = scan.samples[best - 1].first;
  double b = scan.samples[best + 1].first;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = cycle_transfer(cfg, np, params, c);
  double fd = cycle_transfer(cfg, np, params, d);
  while (b - a > 1e-6 * scan.samples[best].first) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = cycle_transfer(cfg, np, params, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = cycle_transfer(cfg, np, params, d);
    }
  }
  scan.tau_star = 0.5 * (a + b);
  scan.transfer = cycle_transfer(cfg, np, params, scan.tau_star);
  if (scan.transfer < scan.samples[best].second) {
    scan.tau_star = scan.samples[best].first;
    scan.transfer = scan.samples[best].second;
  }
  return scan;
}

SweepResult sweep_map(const std::vector<double>& deltas, const std::vector<double>& sigmas,
                      const PulsePolConfig& cfg, const NuclearParams& np,
                      const CavityParams& params, const NoiseModel& noise, int threads) {
  if (deltas.empty() || sigmas.empty()) {
    throw std::invalid_argument("sweep_map: grids must be non-empty");
  }
  SweepResult out;
  out.deltas = deltas;
  out.sigmas = sigmas;
  out.curves.resize(deltas.size() * sigmas.size());
  run_indexed(out.curves.size(), threads, [&](std::size_t cell) {
    NoiseModel n = noise;
    n.sigma = sigmas[cell % sigmas.size()];
    n.seed = mix_seed(noise.seed, cell);
    out.curves[cell] = run_protocol(cfg, np, deltas[cell / sigmas.size()], n, params);
  });
  return out;
}

std::vector<double> average_polarization_curve(const SweepResult& sweep, double delta_max,
                                               double sigma_max, bool magnitude) {
  std::vector<double> mean;
  std::size_t cells = 0;
  for (std::size_t d = 0; d < sweep.deltas.size(); ++d) {
    if (std::abs(sweep.deltas[d]) > delta_max + 1e-12) continue;
    for (std::size_t s = 0; s < sweep.sigmas.size(); ++s) {
      if (std::abs(sweep.sigmas[s]) > sigma_max + 1e-12) continue;
      const auto& curve = sweep.curves[d * sweep.sigmas.size() + s];
      if (mean.empty()) mean.assign(curve.size(), 0.0);
      for (std::size_t c = 0; c < curve.size(); ++c) {
        mean[c] += magnitude ? std::abs(curve[c]) : curve[c];
      }
      ++cells;
    }
  }
  if (cells == 0) throw std::invalid_argument("average_polarization_curve: empty region");
  for (double& m : mean) m /= static_cast<double>(cells);
  return mean;
}

void write_map_csv(const std::string& path, const SweepResult& sweep) {
  io::CsvWriter csv(path, {"delta_MHz", "sigma", "pol_final"});
  for (std::size_t d = 0; d < sweep.deltas.size(); ++d) {
    for (std::size_t s = 0; s < sweep.sigmas.size(); ++s) {
      csv.row({sweep.deltas[d], sweep.sigmas[s], sweep.final_polarization(d, s)});
    }
  }
}

void write_curve_csv(const std::string& path, const std::vector<double>& curve) {
  io::CsvWriter csv(path, {"cycle", "pol_mean"});
  for (std::size_t c = 0; c < curve.size(); ++c) {
    csv.row({static_cast<double>(c + 1), curve[c]});
  }
}

}  // namespace cgrape::ensemble
