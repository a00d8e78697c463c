#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nlsmod/grid.hpp"
#include "nlsmod/params.hpp"

namespace nlsmod {

/// Time-step control. In the v-frame the step taken at tau never exceeds
/// min(dt_max, c (1 - b tau) / b), so steps are uniform in -log(1 - b tau)
/// near the singular time. u-frame runs take the image of that sequence
/// under t = tau / (1 - b tau).
struct StepSchedule {
  double dt_max = 2.5e-4;
  double endpoint_factor = 0.02;
  double eps_end = 1e-6;
  std::vector<double> snapshot_times;
  /// Overrides the end time derived from eps_end (frame time units).
  std::optional<double> end_time;

  void validate(const PhysParams& p, Frame frame) const {
    if (!(dt_max > 0.0)) throw Error("schedule dt_max must be positive");
    if (!(endpoint_factor > 0.0 && endpoint_factor <= 1.0))
      throw Error("schedule endpoint_factor must lie in (0, 1]");
    if (!(eps_end > 0.0 && eps_end < 1.0)) throw Error("schedule eps_end must lie in (0, 1)");
    if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end()))
      throw Error("snapshot times must be sorted");
    const double end = final_time(p, frame);
    if (frame == Frame::V && !(end < 1.0 / p.b)) throw Error("tau_end must be < 1/b");
    for (double s : snapshot_times)
      if (s < 0.0 || s > end * (1.0 + 1e-14))
        throw Error("snapshot time " + std::to_string(s) + " outside [0, end]");
  }

  double tau_end(const PhysParams& p) const { return (1.0 - eps_end) / p.b; }

  double final_time(const PhysParams& p, Frame frame) const {
    if (end_time) return *end_time;
    const double te = tau_end(p);
    return frame == Frame::V ? te : te / (1.0 - p.b * te);
  }

  /// Largest admissible step from `time` (before clipping to snapshots / end).
  double step_from(double time, const PhysParams& p, Frame frame) const {
    if (frame == Frame::V) return std::min(dt_max, endpoint_factor * (1.0 - p.b * time) / p.b);
    const double tau = time / (1.0 + p.b * time);
    const double dtau = std::min(dt_max, endpoint_factor * (1.0 - p.b * tau) / p.b);
    const double tau1 = tau + dtau;
    return tau1 / (1.0 - p.b * tau1) - time;
  }
};

/// Snapshot times with `per_decade` points per decade of 1 - b tau, from
/// 1 - b tau = 10^{-first_decade} down to eps_end, plus `early` uniformly
/// spaced times before that. Returned in the requested frame's time units.
inline std::vector<double> clustered_snapshot_times(const PhysParams& p, double eps_end,
                                                    int per_decade, int early = 4,
                                                    double first_decade = 0.0,
                                                    Frame frame = Frame::V) {
  std::vector<double> taus;
  const double e0 = std::pow(10.0, -first_decade);
  const double tau0 = (1.0 - e0) / p.b;
  if (tau0 > 0.0)
    for (int i = 1; i <= early; ++i) taus.push_back(tau0 * i / (early + 1));
  if (per_decade > 0) {
    const double decades = -std::log10(eps_end) - first_decade;
    const int count = static_cast<int>(std::ceil(decades * per_decade - 1e-9));
    for (int i = 0; i <= count; ++i) {
      const double e = std::max(eps_end, e0 * std::pow(10.0, -static_cast<double>(i) / per_decade));
      const double tau = (1.0 - e) / p.b;
      if (tau > 0.0 && (taus.empty() || tau > taus.back())) taus.push_back(tau);
    }
  }
  if (frame == Frame::U)
    for (auto& t : taus) t = t / (1.0 - p.b * t);
  return taus;
}

/// The solution curve: snapshots in one frame on one grid, strictly increasing in time.
struct Trajectory {
  PhysParams params;
  StepSchedule schedule;
  std::vector<Field> snapshots;
  std::string provenance;
  std::vector<std::string> flags;
  long steps_taken = 0;
  bool complete = true;

  Frame frame() const { return snapshots.empty() ? Frame::V : snapshots.front().frame; }

  void validate() const {
    for (std::size_t i = 1; i < snapshots.size(); ++i) {
      if (!(snapshots[i].time > snapshots[i - 1].time))
        throw Error("trajectory snapshots must be strictly increasing in time");
      if (snapshots[i].frame != snapshots[0].frame) throw Error("trajectory mixes frames");
      if (!(snapshots[i].grid == snapshots[0].grid)) throw Error("trajectory mixes grids");
    }
  }
};

}  // namespace nlsmod
