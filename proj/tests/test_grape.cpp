#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cgrape/grape.hpp"

namespace {

using namespace cgrape;
using namespace cgrape::grape;
using cavity::CavityParams;
using cavity::ControlWaveform;

constexpr double kPi = spin::kTwoPi / 2.0;

CostSpec three_point_spec(double theta) {
  CostSpec spec;
  spec.target = spin::rotation(spin::Axis::x, theta);
  spec.detunings = uniform_detuning_grid(2.0, 3);
  return spec;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(DetuningGrid, UniformWeightsSymmetricNodes) {
  const auto grid = uniform_detuning_grid(5.0, 21);
  ASSERT_EQ(grid.size(), 21u);
  double total = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    total += grid[k].weight;
    EXPECT_NEAR(grid[k].delta, -grid[grid.size() - 1 - k].delta, 1e-14);
  }
  EXPECT_NEAR(total, 1.0, 1e-14);
  EXPECT_EQ(uniform_detuning_grid(3.0, 1).front().delta, 0.0);
}

TEST(CostSpec, ValidateRejectsBadWeights) {
  CostSpec spec;
  spec.detunings = {{0.0, 0.4}, {1.0, 0.4}};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.detunings = {{0.0, 1.0}};
  spec.target = 2.0 * spin::Mat2::Identity();
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(Cost, IdealSquarePulseReachesOne) {
  // a constant field of 24 MHz for 1/48 us rotates by pi about x
  cavity::IntraCavityWaveform field;
  field.dt = 1.0 / 48.0 / 100.0;
  field.omega_x.assign(100, 24.0);
  field.omega_y.assign(100, 0.0);
  CostSpec spec;
  spec.target = spin::rotation(spin::Axis::x, kPi);
  EXPECT_NEAR(cost_on_field(field, spec), 1.0, 1e-12);
  EXPECT_NEAR(gate_fidelity(field, spec.target, 0.0), 1.0, 1e-12);
}

TEST(Cost, InvariantUnderGlobalPhaseOfTarget) {
  const auto ctrl = random_ansatz(30, 0.0025, 0.8, 77);
  const CavityParams p{20.0, 24.0, 5};
  CostSpec a = three_point_spec(kPi / 2.0);
  CostSpec b = a;
  b.target *= std::polar(1.0, 0.731);
  EXPECT_NEAR(cost(ctrl, p, a), cost(ctrl, p, b), 1e-12);
}

TEST(Gradient, FieldGradientMatchesCentralDifference) {
  const CavityParams p{20.0, 24.0, 2};
  const auto ctrl = random_ansatz(20, 0.002, 0.9, 5);
  const auto field = cavity::propagate(p, ctrl);
  const CostSpec spec = three_point_spec(kPi);
  const auto g = grad_phi_wrt_omega(field, spec);
  const double h = 1e-5;
  for (std::size_t j = 0; j < field.size(); ++j) {
    auto up = field, down = field;
    up.omega_x[j] += h;
    down.omega_x[j] -= h;
    const double fx = (cost_on_field(up, spec) - cost_on_field(down, spec)) / (2 * h);
    up = field;
    down = field;
    up.omega_y[j] += h;
    down.omega_y[j] -= h;
    const double fy = (cost_on_field(up, spec) - cost_on_field(down, spec)) / (2 * h);
    EXPECT_NEAR(g.grad.x[j], fx, 1e-9);
    EXPECT_NEAR(g.grad.y[j], fy, 1e-9);
  }
  EXPECT_NEAR(g.phi, cost_on_field(field, spec), 1e-15);
}

TEST(Gradient, ChainedGradientMatchesCentralDifference) {
  const CavityParams p{20.0, 24.0, 3};
  const auto ctrl = random_ansatz(25, 0.003, 1.0 / std::sqrt(2.0), 19);
  const CostSpec spec = three_point_spec(kPi / 2.0);
  const auto field_grad = grad_phi_wrt_omega(ctrl, p, spec);
  const auto g = chain_to_control(field_grad.grad, p, ctrl.delta_t / p.r);
  const double h = 1e-6;
  for (std::size_t i = 0; i < ctrl.size(); ++i) {
    for (int q = 0; q < 2; ++q) {
      auto up = ctrl, down = ctrl;
      (q == 0 ? up.fx : up.fy)[i] += h;
      (q == 0 ? down.fx : down.fy)[i] -= h;
      const double fd = (cost(up, p, spec) - cost(down, p, spec)) / (2 * h);
      const double an = (q == 0 ? g.x : g.y)[i];
      EXPECT_LE(std::abs(an - fd), 1e-5 * std::max(std::abs(fd), 1e-3)) << "i=" << i;
    }
  }
}

TEST(Gradient, FullStepKernelIsAnApproximation) {
  const CavityParams p{20.0, 24.0, 10};
  const auto ctrl = random_ansatz(10, 0.0025, 0.7, 3);
  const auto fg = grad_phi_wrt_omega(ctrl, p, three_point_spec(kPi));
  const double dt = ctrl.delta_t / p.r;
  const auto exact = chain_to_control(fg.grad, p, dt, KernelModel::exact);
  const auto approx = chain_to_control(fg.grad, p, dt, KernelModel::full_step);
  EXPECT_GT(max_abs_diff(exact.x, approx.x), 1e-6);
}

TEST(Gradient, ThreadCountDoesNotChangeBits) {
  const CavityParams p{20.0, 24.0, 4};
  const auto ctrl = random_ansatz(40, 0.0025, 0.6, 8);
  CostSpec spec = three_point_spec(kPi);
  spec.detunings = uniform_detuning_grid(5.0, 11);
  const auto a = grad_phi_wrt_omega(ctrl, p, spec, 1);
  const auto b = grad_phi_wrt_omega(ctrl, p, spec, 4);
  EXPECT_EQ(a.phi, b.phi);
  EXPECT_EQ(a.grad.x, b.grad.x);
  EXPECT_EQ(a.grad.y, b.grad.y);
}

TEST(RingingPenalty, TouchesOnlyTheLastSlice) {
  FieldGradient g{{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}};
  apply_ringing_penalty(g, 2.0, -1.0, 0.5);
  EXPECT_EQ(g.x, (std::vector<double>{1.0, 2.0, 2.0}));
  EXPECT_EQ(g.y, (std::vector<double>{4.0, 5.0, 6.5}));
}

TEST(PenalizedObjective, ClosedForm) {
  EXPECT_DOUBLE_EQ(penalized_objective(0.9, 3.0, 4.0, 0.01), 0.9 - 0.005 * 25.0);
}

TEST(ProjectUnitDisc, Properties) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double x = u(rng), y = u(rng);
    const auto [px, py] = project_unit_disc(x, y);
    const double r = std::hypot(x, y);
    EXPECT_LE(std::hypot(px, py), 1.0 + 1e-15);
    if (r <= 1.0) {
      EXPECT_EQ(px, x);
      EXPECT_EQ(py, y);
    } else {
      EXPECT_NEAR(std::hypot(px, py), 1.0, 1e-15);
      EXPECT_NEAR(px * y - py * x, 0.0, 1e-12);  // same direction
      EXPECT_GT(px * x + py * y, 0.0);
    }
    const auto [qx, qy] = project_unit_disc(px, py);
    EXPECT_NEAR(qx, px, 1e-15);
    EXPECT_NEAR(qy, py, 1e-15);
  }
}

TEST(Adam, FirstStepMovesByLearningRateAlongGradientSign) {
  ControlWaveform c;
  c.delta_t = 0.01;
  c.fx = {0.1, -0.2};
  c.fy = {0.0, 0.3};
  auto s = OptimizerState::start(c, {0.01, 0.9, 0.999, 1e-12});
  s = adam_update(s, {2.0, -0.5, 1e-3, -7.0});
  EXPECT_NEAR(s.controls.fx[0], 0.11, 1e-9);
  EXPECT_NEAR(s.controls.fx[1], -0.21, 1e-9);
  EXPECT_NEAR(s.controls.fy[0], 0.01, 1e-9);
  EXPECT_NEAR(s.controls.fy[1], 0.29, 1e-9);
  EXPECT_EQ(s.iteration, 1);
}

TEST(Adam, KeepsControlsInsideUnitDisc) {
  ControlWaveform c;
  c.delta_t = 0.01;
  c.fx = {0.999};
  c.fy = {0.0};
  auto s = OptimizerState::start(c, {0.5, 0.9, 0.999, 1e-8});
  for (int k = 0; k < 10; ++k) s = adam_update(s, {1.0, 1.0});
  EXPECT_TRUE(s.controls.normalized());
}

TEST(Adam, RejectsWrongGradientSize) {
  ControlWaveform c;
  c.delta_t = 0.01;
  c.fx = {0.0, 0.0};
  c.fy = {0.0, 0.0};
  EXPECT_THROW(adam_update(OptimizerState::start(c), {1.0}), std::invalid_argument);
}

TEST(TransformAxis, YPulseMirrorsXPulseAtEveryDetuning) {
  const CavityParams p{20.0, 24.0, 5};
  const auto ctrl = random_ansatz(30, 0.0025, 0.7, 12);
  const auto fx = cavity::propagate(p, ctrl);
  const auto fy = cavity::propagate(p, transform_axis(ctrl));
  for (double theta : {kPi, kPi / 2.0}) {
    const auto ux = spin::rotation(spin::Axis::x, theta);
    const auto uy = spin::rotation(spin::Axis::y, theta);
    for (double delta : {-4.0, -1.0, 0.0, 2.5}) {
      EXPECT_NEAR(gate_fidelity(fx, ux, delta), gate_fidelity(fy, uy, delta), 1e-12);
    }
  }
}

TEST(TransformAxis, FourfoldIsIdentity) {
  const auto ctrl = random_ansatz(10, 0.0025, 0.7, 1);
  const auto back = transform_axis(transform_axis(transform_axis(transform_axis(ctrl))));
  EXPECT_EQ(back.fx, ctrl.fx);
  EXPECT_EQ(back.fy, ctrl.fy);
}

TEST(RandomAnsatz, DeterministicAndBounded) {
  const auto a = random_ansatz(50, 0.0025, 0.4, 99);
  const auto b = random_ansatz(50, 0.0025, 0.4, 99);
  const auto c = random_ansatz(50, 0.0025, 0.4, 100);
  EXPECT_EQ(a.fx, b.fx);
  EXPECT_NE(a.fx, c.fx);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LE(std::abs(a.fx[i]), 0.4);
    EXPECT_LE(std::abs(a.fy[i]), 0.4);
  }
}

TEST(CompositeAnsatz, FillsWindowWithinUnitDisc) {
  const CavityParams p{20.0, 24.0, 10};
  const auto c = composite_ansatz(kPi, 100, 0.0025, p);
  EXPECT_EQ(c.size(), 100u);
  EXPECT_TRUE(c.normalized());
  double on = 0.0;
  for (double v : c.fx) on += std::abs(v) > 0.0 ? 1.0 : 0.0;
  EXPECT_GT(on, 80.0);
}

TEST(Optimize, ImprovesAndIsDeterministic) {
  const CavityParams p{20.0, 24.0, 2};
  CostSpec spec = three_point_spec(kPi / 2.0);
  spec.max_iters = 150;
  spec.fidelity_threshold = 1e-9;
  const auto init = random_ansatz(20, 0.004, 0.5, 4);
  const auto a = optimize(init, p, spec);
  const auto b = optimize(init, p, spec);
  EXPECT_GT(a.report.final_phi, cost(init, p, spec) + 0.1);
  ASSERT_EQ(a.report.trace.size(), b.report.trace.size());
  for (std::size_t k = 0; k < a.report.trace.size(); ++k) {
    EXPECT_EQ(a.report.trace[k].phi, b.report.trace[k].phi);
    EXPECT_TRUE(std::isfinite(a.report.trace[k].phi));
    if (k > 0) {
      EXPECT_GE(a.report.trace[k].best_objective, a.report.trace[k - 1].best_objective);
    }
  }
  EXPECT_EQ(a.controls.fx, b.controls.fx);
  EXPECT_EQ(a.report.termination, Termination::max_iterations);
  EXPECT_NEAR(a.report.final_phi, cost(a.controls, p, spec), 1e-12);
}

TEST(Optimize, UnreachableThresholdInOneStep) {
  const CavityParams p{20.0, 24.0, 2};
  CostSpec spec = three_point_spec(kPi);
  spec.max_iters = 1;
  spec.fidelity_threshold = 1e-9;
  const auto r = optimize(random_ansatz(10, 0.004, 0.5, 2), p, spec);
  EXPECT_EQ(r.report.termination, Termination::max_iterations);
  EXPECT_EQ(r.report.iterations, 1);
}

TEST(Optimize, ThresholdStopsEarly) {
  const CavityParams p{20.0, 24.0, 2};
  CostSpec spec;
  spec.target = spin::rotation(spin::Axis::x, kPi / 2.0);
  spec.max_iters = 3000;
  spec.fidelity_threshold = 1e-2;
  const auto r = optimize(random_ansatz(20, 0.004, 0.3, 6), p, spec);
  EXPECT_EQ(r.report.termination, Termination::threshold_reached);
  EXPECT_LT(r.report.iterations, 3000);
  EXPECT_GT(r.report.final_phi, 0.99);
}

}  // namespace
