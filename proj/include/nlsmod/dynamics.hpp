#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nlsmod/fft.hpp"
#include "nlsmod/grid.hpp"
#include "nlsmod/norms.hpp"
#include "nlsmod/params.hpp"
#include "nlsmod/spectral.hpp"
#include "nlsmod/trajectory.hpp"

namespace nlsmod {

/// G = int_{t0}^{t1} g(s) ds with g = (1 - b s)^{-1} in the v-frame and g = 1 in the u-frame.
inline double gauge_integral(double t0, double t1, const PhysParams& p, Frame frame) {
  if (frame == Frame::U) {
    if (t0 < 0.0 || t1 < t0) throw Error("u-frame substep needs 0 <= t0 <= t1");
    return t1 - t0;
  }
  if (t0 < 0.0 || t1 < t0) throw Error("v-frame substep needs 0 <= t0 <= t1");
  if (!(p.b * t1 < 1.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "v-frame substep end " << t1 << " reaches the singular time 1/b = " << 1.0 / p.b;
    throw Error(os.str());
  }
  // log((1 - b t0) / (1 - b t1)), written to keep precision when 1 - b t is tiny.
  return -std::log1p(-p.b * (t1 - t0) / (1.0 - p.b * t0)) / p.b;
}

namespace detail {

// |z|^alpha for the three critical powers without a general pow.
inline double abs_pow(Complex z, double alpha) {
  const double n2 = std::norm(z);
  if (alpha == 2.0) return n2;
  if (alpha == 1.0) return std::sqrt(n2);
  return std::pow(n2, 0.5 * alpha);
}

inline double one_plus_pow(double x, double alpha) {
  if (alpha == 2.0) return 1.0 / std::sqrt(1.0 + x);
  if (alpha == 1.0) return 1.0 / (1.0 + x);
  return std::pow(1.0 + x, -1.0 / alpha);
}

}  // namespace detail

/// Exact flow of i z' = lambda g |z|^alpha z over a gauge integral G.
inline Complex nonlinear_flow(Complex z, double G, const PhysParams& p) {
  const double ra = detail::abs_pow(z, p.alpha);
  if (ra == 0.0) return 0.0;
  const double gi = std::abs(p.lambda.imag());
  const double x = p.alpha * gi * G * ra;
  if (x == 0.0) return z * std::polar(1.0, -p.lambda.real() * ra * G);
  // int g |z|^alpha ds = |z0|^alpha G log(1 + x) / x, which tends to |z0|^alpha G as x -> 0.
  const double lg = std::log1p(x);
  const double scale = detail::one_plus_pow(x, p.alpha);
  if (p.lambda.real() == 0.0) return z * scale;
  return z * scale * std::polar(1.0, -p.lambda.real() * lg / (p.alpha * gi));
}

/// Pointwise exact solution of the nonlinear part over [t0, t1].
inline Field substep_nonlinear(const Field& field, double t0, double t1, const PhysParams& p) {
  require_finite(field, "substep_nonlinear input");
  const double G = gauge_integral(t0, t1, p, field.frame);
  Field out = field;
  if (p.lambda == Complex(0.0)) return out;
  for (auto& z : out.values) z = nonlinear_flow(z, G, p);
  return out;
}

/// Reusable Strang stepper working in place on one state vector.
class StrangStepper {
 public:
  StrangStepper(const GridSpec& grid, const PhysParams& p, bool dealias = false)
      : grid_(grid), params_(p), dealias_(dealias), k2_(fft::wavenumber_squared(grid)) {}

  void step(Field& f, double t, double dt) const {
    const double tm = t + 0.5 * dt, t1 = t + dt;
    nonlinear(f, gauge_integral(t, tm, params_, f.frame));
    fft::forward(grid_, f.values);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] *= std::polar(1.0, -dt * k2_[i]);
    if (dealias_) truncate_two_thirds(f);
    fft::backward(grid_, f.values);
    nonlinear(f, gauge_integral(tm, t1, params_, f.frame));
    f.time = t1;
  }

 private:
  void nonlinear(Field& f, double G) const {
    if (params_.lambda == Complex(0.0)) return;
    for (auto& z : f.values) z = nonlinear_flow(z, G, params_);
  }

  void truncate_two_thirds(Field& f) const {
    const int cut = grid_.points / 3;
    for (std::size_t p = 0; p < f.size(); ++p) {
      auto idx = grid_.unflatten(p);
      for (int d = 0; d < grid_.dimension; ++d) {
        const int j = idx[d] < grid_.points / 2 ? idx[d] : grid_.points - idx[d];
        if (j > cut) {
          f[p] = 0.0;
          break;
        }
      }
    }
  }

  GridSpec grid_;
  PhysParams params_;
  bool dealias_;
  std::vector<double> k2_;
};

/// Half nonlinear substep, free flow over dt, half nonlinear substep.
inline Field strang_step(const Field& field, double t, double dt, const PhysParams& p,
                         bool dealias = false) {
  require_finite(field, "strang_step input");
  Field out = field;
  out.time = t;
  StrangStepper(field.grid, p, dealias).step(out, t, dt);
  return out;
}

/// Everything needed to continue a run exactly where it stopped.
struct IntegratorState {
  Field current;
  long step = 0;
  std::size_t next_snapshot = 0;
  std::vector<Field> snapshots;
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double last_good_time, long last_good_step,
                   long last_checkpoint_step)
      : Error(what),
        last_good_time(last_good_time),
        last_good_step(last_good_step),
        last_checkpoint_step(last_checkpoint_step) {}
  double last_good_time;
  long last_good_step;
  long last_checkpoint_step;  ///< -1 when no checkpoint was written
};

struct EvolveOptions {
  bool dealias = false;
  /// Snapshots with min <x>^n |v| below inf_floor are flagged (not fatal). Disabled when <= 0.
  double inf_floor = 0.0;
  double weight_n = 1.0;
  Window window{};
  long checkpoint_every = 0;
  std::function<void(const IntegratorState&)> on_checkpoint;
  std::optional<IntegratorState> resume;
  /// Stop (with complete = false) after this many total steps; negative means run to the end.
  long halt_after_steps = -1;
};

/// Marches Strang steps from `initial` to the schedule's final time, recording snapshots.
inline Trajectory evolve(const Field& initial, const PhysParams& p, const StepSchedule& schedule,
                         const EvolveOptions& opt = {}) {
  p.validate();
  require_finite(initial, "initial data");
  const Frame frame = initial.frame;
  schedule.validate(p, frame);
  if (frame == Frame::V && !(initial.time >= 0.0 && p.b * initial.time < 1.0))
    throw Error("v-frame initial time must lie in [0, 1/b)");

  Trajectory traj;
  traj.params = p;
  traj.schedule = schedule;

  IntegratorState st;
  if (opt.resume) {
    st = *opt.resume;
    if (!(st.current.grid == initial.grid) || st.current.frame != frame)
      throw Error("resume state does not match the run's grid or frame");
  } else {
    st.current = initial;
    st.snapshots.push_back(initial);
    while (st.next_snapshot < schedule.snapshot_times.size() &&
           schedule.snapshot_times[st.next_snapshot] <= initial.time)
      ++st.next_snapshot;
  }

  auto check_floor = [&](const Field& f) {
    if (opt.inf_floor <= 0.0) return;
    const double m = inf_weighted(f, opt.weight_n, opt.window);
    if (m < opt.inf_floor) {
      std::ostringstream os;
      os << "inf <x>^n|v| = " << m << " below floor " << opt.inf_floor << " at time " << f.time;
      traj.flags.push_back(os.str());
    }
  };
  if (!opt.resume) check_floor(initial);

  const double end = schedule.final_time(p, frame);
  const double tiny = 1e-13 * std::max(end, 1e-300);
  StrangStepper stepper(initial.grid, p, opt.dealias);
  long last_checkpoint = -1;
  Field good = st.current;

  while (st.current.time < end - tiny) {
    if (opt.halt_after_steps >= 0 && st.step >= opt.halt_after_steps) {
      traj.complete = false;
      if (opt.on_checkpoint) opt.on_checkpoint(st);
      break;
    }
    const double t = st.current.time;
    double target = end;
    if (st.next_snapshot < schedule.snapshot_times.size())
      target = std::min(target, schedule.snapshot_times[st.next_snapshot]);
    double t1 = t + schedule.step_from(t, p, frame);
    if (t1 >= target - tiny) t1 = target;
    stepper.step(st.current, t, t1 - t);
    ++st.step;

    bool finite = true;
    for (const auto& z : st.current.values)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        finite = false;
        break;
      }
    if (!finite) {
      std::ostringstream os;
      os.precision(17);
      os << "non-finite state after step " << st.step << " at time " << t1
         << "; last good state at time " << good.time;
      if (last_checkpoint >= 0) os << ", last checkpoint at step " << last_checkpoint;
      throw IntegrationError(os.str(), good.time, st.step - 1, last_checkpoint);
    }
    good = st.current;

    while (st.next_snapshot < schedule.snapshot_times.size() &&
           schedule.snapshot_times[st.next_snapshot] <= t1 + tiny) {
      Field snap = st.current;
      snap.time = schedule.snapshot_times[st.next_snapshot];
      st.snapshots.push_back(std::move(snap));
      check_floor(st.snapshots.back());
      ++st.next_snapshot;
    }
    if (opt.checkpoint_every > 0 && st.step % opt.checkpoint_every == 0 && opt.on_checkpoint) {
      opt.on_checkpoint(st);
      last_checkpoint = st.step;
    }
  }

  traj.snapshots = std::move(st.snapshots);
  traj.steps_taken = st.step;
  traj.validate();
  return traj;
}

}  // namespace nlsmod
