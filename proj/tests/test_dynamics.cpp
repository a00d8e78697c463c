#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace nlsmod;
using testutil::sample;

namespace {

Field uniform(const GridSpec& g, Complex z, Frame f = Frame::V) {
  Field out(g, f, 0.0);
  for (auto& v : out.values) v = z;
  return out;
}

StepSchedule short_schedule(double end, std::vector<double> snaps, double dt) {
  StepSchedule s;
  s.dt_max = dt;
  s.endpoint_factor = 1.0;
  s.end_time = end;
  s.snapshot_times = std::move(snaps);
  return s;
}

}  // namespace

TEST(Params, Validation) {
  EXPECT_THROW(PhysParams::make(1, Complex(0.0, 0.5), 1.0), Error);
  EXPECT_THROW(PhysParams::make(1, Complex(1.0, 0.0), 0.0), Error);
  EXPECT_THROW(PhysParams::make(4, Complex(1.0, 0.0), 1.0), Error);
  auto p = PhysParams::make(3, Complex(1.0, -1.0), 2.0);
  EXPECT_DOUBLE_EQ(p.alpha * p.dimension, 2.0);
}

TEST(NonlinearSubstep, RealLambdaPhase) {
  auto p = PhysParams::make(1, Complex(1.0, 0.0), 1.0);
  GridSpec g(1, 1.0, 8);
  auto out = substep_nonlinear(uniform(g, 1.0), 0.0, -std::expm1(-1.0), p);
  for (const auto& z : out.values) EXPECT_NEAR(std::abs(z - std::polar(1.0, -1.0)), 0.0, 1e-14);
}

TEST(NonlinearSubstep, DissipativeModulus) {
  auto p = PhysParams::make(1, Complex(0.0, -1.0), 1.0);
  GridSpec g(1, 1.0, 8);
  auto out = substep_nonlinear(uniform(g, 1.0), 0.0, -std::expm1(-1.0), p);
  for (const auto& z : out.values) {
    EXPECT_NEAR(std::abs(z), 1.0 / std::sqrt(3.0), 1e-14);
    EXPECT_NEAR(std::arg(z), 0.0, 1e-14);
  }
}

TEST(NonlinearSubstep, ConservativeKeepsModulus) {
  auto p = PhysParams::make(2, Complex(-2.5, 0.0), 3.0);
  GridSpec g(2, 5.0, 16);
  auto f = sample(g, [](const Point& x) { return std::exp(Complex(-0.1 * testutil::r2(x), x[1])); });
  auto out = substep_nonlinear(f, 0.01, 0.2, p);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(std::abs(out[i]), std::abs(f[i]), 1e-14);
}

TEST(NonlinearSubstep, Additive) {
  for (Complex lambda : {Complex(1.0, -1.0), Complex(0.0, -2.0), Complex(-3.0, 0.0)}) {
    auto p = PhysParams::make(1, lambda, 5.0);
    GridSpec g(1, 5.0, 32);
    auto f = sample(g, [](const Point& x) { return std::exp(Complex(-0.2 * x[0] * x[0], 0.5 * x[0])); });
    auto two = substep_nonlinear(substep_nonlinear(f, 0.0, 0.1, p), 0.1, 0.19, p);
    auto one = substep_nonlinear(f, 0.0, 0.19, p);
    EXPECT_LE(sup_distance(one, two), 1e-12);
  }
}

TEST(NonlinearSubstep, ZeroStaysZeroAndSingularTimeRejected) {
  auto p = PhysParams::make(1, Complex(1.0, -1.0), 2.0);
  GridSpec g(1, 1.0, 8);
  auto out = substep_nonlinear(uniform(g, 0.0), 0.0, 0.3, p);
  for (const auto& z : out.values) EXPECT_EQ(z, Complex(0.0));
  EXPECT_THROW(substep_nonlinear(uniform(g, 1.0), 0.0, 0.5, p), Error);
  // The u-frame has no singular time.
  EXPECT_NO_THROW(substep_nonlinear(uniform(g, 1.0, Frame::U), 0.0, 5.0, p));
}

TEST(NonlinearSubstep, MatchesOdeOracle) {
  auto p = PhysParams::make(1, Complex(0.7, -1.3), 4.0);
  GridSpec g(1, 1.0, 4);
  const Complex z0(0.4, -1.1);
  const double t = 0.2;
  auto out = substep_nonlinear(uniform(g, z0), 0.0, t, p);
  EXPECT_LE(std::abs(out[0] - oracles::ode_closed_form(t, z0, p)), 1e-13);
}

TEST(StrangStep, LinearDegeneratesToFreeFlow) {
  auto p = PhysParams::make(1, Complex(0.0), 1.0);
  GridSpec g(1, 20.0, 128);
  auto f = sample(g, [](const Point& x) { return std::exp(Complex(-x[0] * x[0], x[0])); });
  auto a = strang_step(f, 0.1, 0.05, p);
  auto b = free_propagate(f, 0.05);
  EXPECT_LE(sup_distance(a, b), 1e-14);
  auto z = strang_step(Field(g, Frame::V, 0.0), 0.0, 0.1, PhysParams::make(1, Complex(1.0, -1.0), 1.0));
  EXPECT_EQ(sup_norm(z), 0.0);
}

TEST(StrangStep, SecondOrderRichardson) {
  auto p = PhysParams::make(1, Complex(1.0, -0.5), 1.0);
  GridSpec g(1, 20.0, 256);
  auto f0 = sample(g, [](const Point& x) {
    return Complex(1.5 * std::exp(-x[0] * x[0] / 2.0), 0.0);
  }, Frame::U);
  const double T = 0.4;
  auto run = [&](int n) {
    Field f = f0;
    const double dt = T / n;
    for (int i = 0; i < n; ++i) f = strang_step(f, i * dt, dt, p);
    return f;
  };
  const auto ref = run(16 * 32);
  const double e1 = l2_distance(run(32), ref);
  const double e2 = l2_distance(run(64), ref);
  EXPECT_NEAR(e1 / e2, 4.0, 0.5);
}

TEST(Evolve, MassMonotonicity) {
  GridSpec g(1, 20.0, 256);
  auto f0 = sample(g, [](const Point& x) { return Complex(1.0 / (1.0 + x[0] * x[0]), 0.0); });
  StepSchedule s;
  s.dt_max = 1e-3;
  s.endpoint_factor = 0.05;
  s.eps_end = 1e-3;
  auto pd = PhysParams::make(1, Complex(1.0, -1.0), 10.0);
  s.snapshot_times = clustered_snapshot_times(pd, s.eps_end, 5, 10, 1.0);
  auto tr = evolve(f0, pd, s);
  for (std::size_t k = 1; k < tr.snapshots.size(); ++k)
    EXPECT_LE(l2_norm(tr.snapshots[k]), l2_norm(tr.snapshots[k - 1]) * (1.0 + 1e-15));
  auto pc = PhysParams::make(1, Complex(1.0, 0.0), 10.0);
  auto tc = evolve(f0, pc, s);
  for (const auto& snap : tc.snapshots) EXPECT_NEAR(l2_norm(snap) / l2_norm(f0), 1.0, 1e-8);
}

TEST(Evolve, LinearGaussianOracle) {
  GridSpec g(1, 40.0, 1024);
  auto p = PhysParams::make(1, Complex(0.0), 2.0);
  auto f0 = sample(g, [](const Point& x) { return Complex(std::exp(-x[0] * x[0])); });
  auto s = short_schedule(0.45, {0.1, 0.3, 0.45}, 1e-2);
  auto tr = evolve(f0, p, s);
  ASSERT_EQ(tr.snapshots.size(), 4u);
  for (const auto& snap : tr.snapshots) {
    auto ref = sample(g, [&](const Point& x) { return testutil::gaussian_1d(x[0], snap.time, 1.0); });
    EXPECT_LE(relative_l2_distance(snap, ref), 1e-8);
  }
}

TEST(Evolve, UniformDataFollowsOde) {
  GridSpec g(1, 4.0, 16);
  auto p = PhysParams::make(1, Complex(0.5, -1.0), 1.0);
  const Complex z0(1.2, 0.3);
  StepSchedule s;
  s.dt_max = 1e-2;
  s.endpoint_factor = 0.1;
  s.eps_end = 1e-6;
  s.snapshot_times = clustered_snapshot_times(p, s.eps_end, 3, 5, 1.0);
  auto tr = evolve(uniform(g, z0), p, s);
  for (const auto& snap : tr.snapshots) {
    const Complex ref = oracles::ode_closed_form(snap.time, z0, p);
    for (const auto& z : snap.values) EXPECT_LE(std::abs(z - ref), 1e-10);
  }
}

TEST(Evolve, EmptySnapshotListKeepsInitialOnly) {
  GridSpec g(1, 4.0, 16);
  auto p = PhysParams::make(1, Complex(0.0, -1.0), 1.0);
  auto tr = evolve(uniform(g, 1.0), p, short_schedule(0.1, {}, 0.01));
  ASSERT_EQ(tr.snapshots.size(), 1u);
  EXPECT_EQ(tr.snapshots[0].time, 0.0);
  EXPECT_EQ(tr.steps_taken, 10);
}

TEST(Evolve, SnapshotsLandExactly) {
  GridSpec g(1, 4.0, 16);
  auto p = PhysParams::make(1, Complex(0.0, -1.0), 1.0);
  auto tr = evolve(uniform(g, 1.0), p, short_schedule(0.5, {0.0123, 0.25, 0.5}, 0.01));
  ASSERT_EQ(tr.snapshots.size(), 4u);
  EXPECT_EQ(tr.snapshots[1].time, 0.0123);
  EXPECT_EQ(tr.snapshots[3].time, 0.5);
}

TEST(Evolve, HaltAndResumeIsBitIdentical) {
  GridSpec g(1, 20.0, 128);
  auto p = PhysParams::make(1, Complex(1.0, -1.0), 5.0);
  auto f0 = sample(g, [](const Point& x) { return Complex(1.0 / std::sqrt(1.0 + x[0] * x[0])); });
  StepSchedule s;
  s.dt_max = 1e-3;
  s.endpoint_factor = 0.05;
  s.eps_end = 1e-4;
  s.snapshot_times = clustered_snapshot_times(p, s.eps_end, 4, 6, 1.0);
  auto full = evolve(f0, p, s);

  std::optional<IntegratorState> saved;
  EvolveOptions o;
  o.halt_after_steps = 77;
  o.on_checkpoint = [&](const IntegratorState& st) { saved = st; };
  auto part = evolve(f0, p, s, o);
  EXPECT_FALSE(part.complete);
  ASSERT_TRUE(saved);
  EvolveOptions r;
  r.resume = saved;
  auto rest = evolve(f0, p, s, r);
  ASSERT_EQ(rest.snapshots.size(), full.snapshots.size());
  for (std::size_t k = 0; k < full.snapshots.size(); ++k)
    EXPECT_EQ(rest.snapshots[k].values, full.snapshots[k].values);
  EXPECT_EQ(rest.steps_taken, full.steps_taken);
}

TEST(Evolve, InfFloorIsFlaggedNotFatal) {
  GridSpec g(1, 10.0, 64);
  auto p = PhysParams::make(1, Complex(0.0, -1.0), 1.0);
  auto f0 = sample(g, [](const Point& x) { return Complex(std::exp(-x[0] * x[0])); });
  EvolveOptions o;
  o.inf_floor = 1e-3;
  o.weight_n = 2;
  auto tr = evolve(f0, p, short_schedule(0.05, {0.05}, 0.01), o);
  EXPECT_FALSE(tr.flags.empty());
  EXPECT_TRUE(tr.complete);
}

TEST(StepSchedule, StepNeverExceedsBound) {
  auto p = PhysParams::make(1, Complex(0.0, -1.0), 20.0);
  StepSchedule s;
  s.dt_max = 1e-3;
  s.endpoint_factor = 0.1;
  for (double tau : {0.0, 0.01, 0.049, 0.04999}) {
    const double dt = s.step_from(tau, p, Frame::V);
    EXPECT_LE(dt, std::min(s.dt_max, s.endpoint_factor * (1.0 - p.b * tau) / p.b) * (1 + 1e-15));
  }
  EXPECT_LT(s.tau_end(p), 1.0 / p.b);
  s.eps_end = 0.0;
  EXPECT_THROW(s.validate(p, Frame::V), Error);
}

TEST(StepSchedule, UFrameStepsAreImagesOfVSteps) {
  auto p = PhysParams::make(1, Complex(0.0, -1.0), 20.0);
  StepSchedule s;
  const double tau = 0.03;
  const double t = tau / (1.0 - p.b * tau);
  const double dtau = s.step_from(tau, p, Frame::V);
  const double dt = s.step_from(t, p, Frame::U);
  EXPECT_NEAR(t + dt, (tau + dtau) / (1.0 - p.b * (tau + dtau)), 1e-12);
}

TEST(SnapshotTimes, ClusteredAndSorted) {
  auto p = PhysParams::make(1, Complex(0.0, -1.0), 20.0);
  auto ts = clustered_snapshot_times(p, 1e-6, 10, 20, 1.0);
  ASSERT_FALSE(ts.empty());
  for (std::size_t i = 1; i < ts.size(); ++i) EXPECT_GT(ts[i], ts[i - 1]);
  EXPECT_NEAR(1.0 - p.b * ts.back(), 1e-6, 1e-15);
  int last_decade = 0;
  for (double t : ts)
    if (1.0 - p.b * t <= 1e-5 * (1 + 1e-9)) ++last_decade;
  EXPECT_EQ(last_decade, 11);
}
