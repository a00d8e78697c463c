#pragma once

#include <cmath>
#include <optional>
#include <sstream>

#include "nlsmod/grid.hpp"
#include "nlsmod/params.hpp"
#include "nlsmod/spectral.hpp"

namespace nlsmod {

enum class TimeDirection { ToV, ToU };

/// tau = t / (1 + b t) (ToV) or t = tau / (1 - b tau) (ToU).
inline double map_time(double value, TimeDirection dir, double b) {
  if (!(b > 0.0)) throw Error("map_time needs b > 0");
  if (dir == TimeDirection::ToV) {
    if (value < 0.0) throw Error("map_time: physical time must be >= 0");
    return value / std::fma(b, value, 1.0);
  }
  if (value < 0.0 || !(b * value < 1.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "map_time: tau = " << value << " outside [0, 1/b) with 1/b = " << 1.0 / b;
    throw Error(os.str());
  }
  return value / std::fma(-b, value, 1.0);
}

/// 1 + b t expressed through the v-frame time, 1 / (1 - b tau).
inline double dilation_factor(double tau, double b) { return 1.0 / (1.0 - b * tau); }

struct FrameMapResult {
  Field field;
  double tail_mass_fraction = 0.0;
  bool tail_flag = false;
};

/// u(t, x) = (1+bt)^{-N/2} e^{i b|x|^2 / (4(1+bt))} v(tau, x / (1+bt)).
/// The default target is the v-grid dilated by 1 + bt, on which the dilation is an exact copy.
inline FrameMapResult u_from_v(const Field& v, const PhysParams& p,
                               const std::optional<GridSpec>& target = std::nullopt,
                               double tail_threshold = 1e-12) {
  if (v.frame != Frame::V) throw Error("u_from_v expects a v-frame field");
  require_finite(v, "u_from_v input");
  const double t = map_time(v.time, TimeDirection::ToU, p.b);
  const double a = 1.0 + p.b * t;
  const GridSpec g = target ? *target : dilated(v.grid, a);
  auto r = resample_scaled(v, g, 1.0 / a);
  FrameMapResult out;
  out.field = std::move(r.field);
  out.field.frame = Frame::U;
  out.field.time = t;
  out.tail_mass_fraction = r.tail_mass_fraction;
  out.tail_flag = r.tail_mass_fraction > tail_threshold;
  const double amp = std::pow(a, -0.5 * v.grid.dimension);
  for_each_point(g, [&](std::size_t i, const Point& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    out.field[i] *= amp * std::polar(1.0, p.b * r2 / (4.0 * a));
  });
  return out;
}

/// Inverse of u_from_v. The chirp is removed on the u-grid before interpolating,
/// so only the smooth envelope is resampled.
inline FrameMapResult v_from_u(const Field& u, const PhysParams& p,
                               const std::optional<GridSpec>& target = std::nullopt,
                               double tail_threshold = 1e-12) {
  if (u.frame != Frame::U) throw Error("v_from_u expects a u-frame field");
  require_finite(u, "v_from_u input");
  const double tau = map_time(u.time, TimeDirection::ToV, p.b);
  const double a = 1.0 + p.b * u.time;
  Field env = u;
  for_each_point(u.grid, [&](std::size_t i, const Point& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    env[i] *= std::polar(1.0, -p.b * r2 / (4.0 * a));
  });
  const GridSpec g = target ? *target : dilated(u.grid, 1.0 / a);
  auto r = resample_scaled(env, g, a);
  FrameMapResult out;
  out.field = std::move(r.field);
  out.field.frame = Frame::V;
  out.field.time = tau;
  out.tail_mass_fraction = r.tail_mass_fraction;
  out.tail_flag = r.tail_mass_fraction > tail_threshold;
  const double amp = std::pow(a, 0.5 * u.grid.dimension);
  for (auto& z : out.field.values) z *= amp;
  return out;
}

/// u+ = M_{1/b} e^{-(i/b) Delta} w0 with M_a(x) = e^{i|x|^2 / (4a)}.
inline Field scattering_state_u_plus(const Field& w0, const PhysParams& p) {
  require_finite(w0, "scattering_state_u_plus input");
  Field out = free_propagate(w0, -1.0 / p.b);
  out.frame = Frame::U;
  out.time = 0.0;
  for_each_point(out.grid, [&](std::size_t i, const Point& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    out[i] *= std::polar(1.0, p.b * r2 / 4.0);
  });
  return out;
}

}  // namespace nlsmod
