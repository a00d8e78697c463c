#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nlsmod/fit.hpp"
#include "nlsmod/grid.hpp"
#include "nlsmod/params.hpp"
#include "nlsmod/pseudoconformal.hpp"
#include "nlsmod/spectral.hpp"
#include "nlsmod/trajectory.hpp"

namespace nlsmod {

struct LResult {
  ScalarField L;
  std::size_t masked = 0;
  bool flagged = false;  ///< more than 0.1% of the grid had |v| = 0
};

/// L = -Im(conj(v) Delta v) / |v|, zero (and counted) where v vanishes.
inline LResult compute_L(const Field& v) {
  require_finite(v, "compute_L input");
  const Field lap = laplacian(v);
  LResult r;
  r.L = ScalarField(v.grid);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double m = std::abs(v[i]);
    if (m == 0.0) {
      ++r.masked;
      continue;
    }
    r.L[i] = -std::imag(std::conj(v[i]) * lap[i]) / m;
  }
  r.flagged = static_cast<double>(r.masked) > 1e-3 * static_cast<double>(v.size());
  return r;
}

struct FAccumulation {
  std::vector<double> times;
  std::vector<ScalarField> f_t;
  ScalarField f0;
  std::size_t masked = 0;
};

namespace detail {

inline double sup_abs(const ScalarField& f, const Window& w = {}) {
  double m = 0.0;
  for_each_point(f.grid, [&](std::size_t p, const Point& x) {
    if (w.contains(f.grid, x)) m = std::max(m, std::abs(f[p]));
  });
  return m;
}

inline double sup_abs(const Field& f, const Window& w = {}) {
  double m = 0.0;
  for_each_point(f.grid, [&](std::size_t p, const Point& x) {
    if (w.contains(f.grid, x)) m = std::max(m, std::abs(f[p]));
  });
  return m;
}

inline double weighted_sup_distance(const Field& a, const Field& b, double n, const Window& w) {
  require_same_grid(a, b);
  double m = 0.0;
  for_each_point(a.grid, [&](std::size_t p, const Point& x) {
    if (!w.contains(a.grid, x)) return;
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    m = std::max(m, std::pow(1.0 + r2, 0.5 * n) * std::abs(a[p] - b[p]));
  });
  return m;
}

// Two-point extrapolation assuming q(e) = q0 + C e^p: returns the weight c with
// q0 = q_b + c (q_b - q_a), e_a > e_b.
inline double richardson_weight(double e_a, double e_b, double p) {
  const double ea = std::pow(e_a, p), eb = std::pow(e_b, p);
  return eb / (ea - eb);
}

}  // namespace detail

/// f(t, x) = -alpha int_0^t |phi0|^alpha |v|^{-alpha-1} L ds by the trapezoid rule over the
/// snapshots, and f0 = f(tau_end) corrected by two-point extrapolation in (1 - b tau)^rate.
inline FAccumulation accumulate_f(const Trajectory& traj, const Field& phi0, const PhysParams& p,
                                  double rate_exponent = 1.0) {
  if (traj.frame() != Frame::V) throw Error("accumulate_f needs a v-frame trajectory");
  if (traj.snapshots.empty()) throw Error("accumulate_f needs at least one snapshot");
  require_same_grid(traj.snapshots.front(), phi0);
  FAccumulation out;
  const auto& g = phi0.grid;
  std::vector<double> phi_a(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) phi_a[i] = std::pow(std::abs(phi0[i]), p.alpha);

  auto integrand = [&](const Field& v) {
    auto L = compute_L(v);
    out.masked += L.masked;
    ScalarField I(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double m = std::abs(v[i]);
      if (m == 0.0) continue;
      I[i] = phi_a[i] * std::pow(m, -p.alpha - 1.0) * L.L[i];
      if (!std::isfinite(I[i])) {
        std::ostringstream os;
        os.precision(17);
        os << "f integrand is not finite at snapshot time " << v.time << " (index " << i << ")";
        throw Error(os.str());
      }
    }
    return I;
  };

  ScalarField f(g, 0.0);
  ScalarField prev = integrand(traj.snapshots.front());
  out.times.push_back(traj.snapshots.front().time);
  out.f_t.push_back(f);
  for (std::size_t k = 1; k < traj.snapshots.size(); ++k) {
    ScalarField cur = integrand(traj.snapshots[k]);
    const double ds = traj.snapshots[k].time - traj.snapshots[k - 1].time;
    for (std::size_t i = 0; i < g.size(); ++i) f[i] -= p.alpha * 0.5 * ds * (prev[i] + cur[i]);
    out.times.push_back(traj.snapshots[k].time);
    out.f_t.push_back(f);
    prev = std::move(cur);
  }

  out.f0 = out.f_t.back();
  const std::size_t n = out.f_t.size();
  if (n >= 2) {
    const double ea = 1.0 - p.b * out.times[n - 2], eb = 1.0 - p.b * out.times[n - 1];
    const double c = detail::richardson_weight(ea, eb, rate_exponent);
    for (std::size_t i = 0; i < g.size(); ++i)
      out.f0[i] += c * (out.f_t[n - 1][i] - out.f_t[n - 2][i]);
  }
  return out;
}

/// The extracted asymptotic data of one v-frame run.
struct AsymptoticProfile {
  PhysParams params;
  Field phi0;
  std::vector<double> f_times;
  std::vector<ScalarField> f_t;
  ScalarField f0;
  Field w0;
  std::vector<double> w_times;       ///< snapshot times at which w was formed
  std::vector<double> w_increments;  ///< ||<x>^n (w(tau_k) - w(tau_{k-1}))||_inf
  bool w_convergent = true;
  std::vector<std::string> flags;

  double f0_sup(const Window& w = {}) const { return detail::sup_abs(f0, w); }
};

enum class ProfileQuantity { Psi, Theta, VTilde };

/// psi, theta or v-tilde at v-frame time tau on the grid of phi0.
inline ScalarField profile_eval(const AsymptoticProfile& prof, double tau, ProfileQuantity which) {
  const auto& p = prof.params;
  if (tau < 0.0 || !(p.b * tau < 1.0)) throw Error("profile_eval: tau outside [0, 1/b)");
  const auto& g = prof.phi0.grid;
  if (!(prof.f0.grid == g)) throw Error("profile_eval: f0 missing or on another grid");
  const double ell = -std::log1p(-p.b * tau);
  const double a = p.alpha * std::abs(p.lambda.imag()) / p.b;
  ScalarField out(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double one_f = 1.0 + prof.f0[i];
    if (!(one_f > 0.0)) {
      std::ostringstream os;
      os << "1 + f0 = " << one_f << " <= 0 at index " << i << " (run below threshold)";
      throw Error(os.str());
    }
    const double pa = std::pow(std::abs(prof.phi0[i]), p.alpha);
    const double den = one_f + a * pa * ell;
    switch (which) {
      case ProfileQuantity::Psi:
        out[i] = std::pow(one_f / den, 1.0 / p.alpha);
        break;
      case ProfileQuantity::VTilde:
        out[i] = std::pow(pa / den, 1.0 / p.alpha);
        break;
      case ProfileQuantity::Theta:
        if (p.dissipative()) {
          out[i] = p.lambda.real() / p.lambda.imag() *
                   std::log(std::pow(one_f / den, 1.0 / p.alpha));
        } else {
          out[i] = p.lambda.real() / p.b * pa * ell / one_f;
        }
        break;
    }
  }
  return out;
}

/// w(tau) = v(tau) e^{i theta(tau)} / psi(tau).
inline Field form_w(const Field& v, const AsymptoticProfile& prof) {
  const auto psi = profile_eval(prof, v.time, ProfileQuantity::Psi);
  const auto theta = profile_eval(prof, v.time, ProfileQuantity::Theta);
  Field w = v;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(psi[i] > 0.0)) throw Error("extract_w0: psi vanished on the grid");
    w[i] = v[i] * std::polar(1.0, theta[i]) / psi[i];
  }
  return w;
}

/// w0 from the last two snapshots by extrapolation in (1 - b tau)^rate, and the
/// Cauchy increments of w along the run.
inline void extract_w0(const Trajectory& traj, AsymptoticProfile& prof, double rate_exponent,
                       double weight_n, const Window& window = {},
                       std::size_t convergence_window = 5) {
  if (traj.snapshots.size() < 2) throw Error("extract_w0 needs at least two snapshots");
  const auto& p = prof.params;
  std::optional<Field> prev;
  Field last, before_last;
  prof.w_times.clear();
  prof.w_increments.clear();
  for (const auto& v : traj.snapshots) {
    Field w = form_w(v, prof);
    if (prev) {
      prof.w_times.push_back(v.time);
      prof.w_increments.push_back(detail::weighted_sup_distance(w, *prev, weight_n, window));
    }
    before_last = prev ? std::move(*prev) : Field{};
    prev = std::move(w);
  }
  last = std::move(*prev);
  const double ea = 1.0 - p.b * before_last.time, eb = 1.0 - p.b * last.time;
  const double c = detail::richardson_weight(ea, eb, rate_exponent);
  prof.w0 = last;
  for (std::size_t i = 0; i < last.size(); ++i) prof.w0[i] += c * (last[i] - before_last[i]);
  prof.w0.time = 1.0 / p.b;

  // Increments over log-uniform snapshots must shrink.
  prof.w_convergent = true;
  const std::size_t n = prof.w_increments.size();
  const std::size_t start = n > convergence_window ? n - convergence_window : 0;
  for (std::size_t k = start + 1; k < n; ++k)
    if (prof.w_increments[k] > prof.w_increments[k - 1] * (1.0 + 1e-9)) prof.w_convergent = false;
  if (!prof.w_convergent) prof.flags.push_back("w increments not decreasing: w0 non-convergent");
}

/// z at the physical time matching v-frame time tau. Working from tau keeps the dilation
/// factor identical to the one u_from_v uses for the snapshot itself.
inline Field z_profile_at_tau(double tau, const AsymptoticProfile& prof,
                              const std::optional<GridSpec>& target = std::nullopt) {
  const auto& p = prof.params;
  if (tau < 0.0 || !(p.b * tau < 1.0)) throw Error("z_profile: tau outside [0, 1/b)");
  const double logt = -std::log1p(-p.b * tau);  // log(1 + bt)
  Field P(prof.w0.grid, Frame::V, tau);
  if (p.dissipative()) {
    const auto psi = profile_eval(prof, tau, ProfileQuantity::Psi);
    const double ratio = p.lambda.real() / p.lambda.imag();
    for (std::size_t i = 0; i < P.size(); ++i)
      P[i] = psi[i] * prof.w0[i] * std::polar(1.0, -ratio * std::log(psi[i]));
  } else {
    for (std::size_t i = 0; i < P.size(); ++i) {
      const double wa = std::pow(std::abs(prof.w0[i]), p.alpha);
      P[i] = prof.w0[i] * std::polar(1.0, -p.lambda.real() / p.b * wa * logt);
    }
  }
  return u_from_v(P, p, target).field;
}

/// The theorem profile z(t, .) in the u-frame. The default grid is the v-grid dilated by 1 + bt.
inline Field z_profile(double tphys, const AsymptoticProfile& prof,
                       const std::optional<GridSpec>& target = std::nullopt) {
  if (tphys < 0.0) throw Error("z_profile: t must be >= 0");
  return z_profile_at_tau(map_time(tphys, TimeDirection::ToV, prof.params.b), prof, target);
}

/// Tolerances and fit windows of the asymptotic diagnostics.
struct AsymptoticSettings {
  double weight_n = 1.0;
  Window window{};
  double eps_end = 1e-6;
  double fit_lower_factor = 100.0;  ///< fit window starts at fit_lower_factor * eps_end
  double fit_upper = 1e-2;
  double f_fit_upper = 1e-1;
  double f_rate_min = 0.85;
  double delta_min = 0.8;
  double delta_agreement = 0.1;
  double limit_tolerance = 0.02;
  double f0_bound = 0.5;
  double w0_floor = 1e-6;
  double f_rate_target = 1.0;      ///< 1 - sigma_3, reported
  double residual_target = 1.0;    ///< 1 - sigma_J, reported
};

/// Per-snapshot diagnostics of the run.
struct DiagnosticRow {
  double tau = 0.0, t = 0.0, gap = 0.0;
  double u_res_l2 = 0.0, u_res_linf_scaled = 0.0, v_res_weighted = 0.0;
  double t_u_sup = 0.0, tlogt_u_sup = 0.0, log_v_sup = 0.0;
  double v_sup = 0.0, vtilde_sup = 0.0, f_dist = 0.0;
  double psi_min = 0.0, psi_max = 0.0;
  double w_dist = 0.0;  ///< ||<x>^n (w(tau) - w0)||_inf
};

struct AsymptoticReport {
  std::vector<DiagnosticRow> rows;
  std::vector<FitResult> fits;

  const FitResult* find(const std::string& name) const {
    for (const auto& f : fits)
      if (f.name == name) return &f;
    return nullptr;
  }
};

/// v-frame snapshots mapped to the u-frame on dilated grids.
inline Trajectory map_trajectory_to_u(const Trajectory& v) {
  Trajectory u;
  u.params = v.params;
  u.schedule = v.schedule;
  u.provenance = v.provenance;
  u.steps_taken = v.steps_taken;
  for (const auto& s : v.snapshots) u.snapshots.push_back(u_from_v(s, v.params).field);
  return u;
}

namespace detail {

inline std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

inline FitResult rate_fit(const std::string& name, const std::vector<double>& x,
                          const std::vector<double>& y, double target, double minimum,
                          double sign = 1.0) {
  FitResult r;
  r.name = name;
  r.target = minimum;
  try {
    auto f = loglog_fit(x, y);
    r.estimate = sign * f.slope;
    r.pass = r.estimate >= minimum;
    std::ostringstream os;
    os << "points=" << f.points << ", cascade exponent " << target;
    r.note = os.str();
  } catch (const Error& e) {
    r.estimate = std::nan("");
    r.pass = false;
    r.note = e.what();
  }
  return r;
}

// Distances to the target must not grow along the series.
inline FitResult trend_check(const std::string& name, const std::vector<double>& series,
                             double target) {
  FitResult r;
  r.name = name;
  r.target = target;
  r.estimate = series.empty() ? std::nan("") : series.back();
  r.tolerance = 0.0;
  if (series.size() < 2) {
    r.pass = false;
    r.note = "fewer than two snapshots in the final decade";
    return r;
  }
  r.pass = true;
  for (std::size_t k = 1; k < series.size(); ++k)
    if (std::abs(series[k] - target) > std::abs(series[k - 1] - target) * (1.0 + 1e-12))
      r.pass = false;
  r.note = r.pass ? "monotone approach" : "distance to the limit grew";
  r.tolerance = std::abs(series.back() - target);
  return r;
}

}  // namespace detail

/// Residuals, limit diagnostics and their fits.
inline AsymptoticReport residual_and_limits(const Trajectory& traj_u, const Trajectory& traj_v,
                                            const AsymptoticProfile& prof,
                                            const AsymptoticSettings& s) {
  if (traj_u.snapshots.size() != traj_v.snapshots.size())
    throw Error("residual_and_limits: u and v trajectories differ in length");
  const auto& p = prof.params;
  const int N = p.dimension;
  AsymptoticReport rep;
  for (std::size_t k = 0; k < traj_v.snapshots.size(); ++k) {
    const Field& v = traj_v.snapshots[k];
    const Field& u = traj_u.snapshots[k];
    DiagnosticRow row;
    row.tau = v.time;
    row.t = u.time;
    row.gap = 1.0 - p.b * v.time;
    const Field z = z_profile_at_tau(v.time, prof, u.grid);
    double l2 = 0.0, sup = 0.0;
    for_each_point(u.grid, [&](std::size_t i, const Point& x) {
      if (!s.window.contains(u.grid, x)) return;
      const double d = std::abs(u[i] - z[i]);
      l2 += d * d;
      sup = std::max(sup, d);
    });
    row.u_res_l2 = std::sqrt(l2 * u.grid.cell_volume());
    row.u_res_linf_scaled = std::pow(1.0 + row.t, 0.5 * N) * sup;

    const auto psi = profile_eval(prof, v.time, ProfileQuantity::Psi);
    const auto theta = profile_eval(prof, v.time, ProfileQuantity::Theta);
    Field model = v;
    for (std::size_t i = 0; i < v.size(); ++i)
      model[i] = prof.w0[i] * psi[i] * std::polar(1.0, -theta[i]);
    row.v_res_weighted = detail::weighted_sup_distance(v, model, s.weight_n, s.window);
    row.w_dist = detail::weighted_sup_distance(form_w(v, prof), prof.w0, s.weight_n, s.window);
    row.psi_min = 1.0;
    row.psi_max = 0.0;
    for_each_point(v.grid, [&](std::size_t i, const Point& x) {
      if (!s.window.contains(v.grid, x)) return;
      row.psi_min = std::min(row.psi_min, psi[i]);
      row.psi_max = std::max(row.psi_max, psi[i]);
    });

    const double u_sup = detail::sup_abs(u, s.window);
    row.v_sup = detail::sup_abs(v, s.window);
    row.t_u_sup = std::pow(row.t, 0.5 * N) * u_sup;
    row.tlogt_u_sup = row.t > 1.0 ? std::pow(row.t * std::log(row.t), 0.5 * N) * u_sup : 0.0;
    const double ell = -std::log1p(-p.b * v.time);
    row.log_v_sup = std::pow(ell, 0.5 * N) * row.v_sup;
    row.vtilde_sup = detail::sup_abs(profile_eval(prof, v.time, ProfileQuantity::VTilde), s.window);
    if (k < prof.f_t.size()) {
      double d = 0.0;
      for_each_point(v.grid, [&](std::size_t i, const Point& x) {
        if (s.window.contains(v.grid, x)) d = std::max(d, std::abs(prof.f_t[k][i] - prof.f0[i]));
      });
      row.f_dist = d;
    }
    rep.rows.push_back(row);
  }

  const double lo = s.fit_lower_factor * s.eps_end;
  std::vector<double> gv, rv, rw, tu, ru, gf, rf;
  for (const auto& r : rep.rows) {
    if (r.gap >= lo * (1 - 1e-9) && r.gap <= s.fit_upper * (1 + 1e-9)) {
      gv.push_back(r.gap);
      rv.push_back(r.v_res_weighted);
      rw.push_back(r.w_dist);
      tu.push_back(1.0 + r.t);
      ru.push_back(r.u_res_l2 + r.u_res_linf_scaled);
    }
    if (r.gap >= lo * (1 - 1e-9) && r.gap <= s.f_fit_upper * (1 + 1e-9)) {
      gf.push_back(r.gap);
      rf.push_back(r.f_dist);
    }
  }

  rep.fits.push_back(detail::rate_fit("f_convergence_rate", gf, rf, s.f_rate_target, s.f_rate_min));
  {
    FitResult r{"f0_sup_bound", prof.f0_sup(s.window), s.f0_bound, 0.0, false, ""};
    r.pass = r.estimate <= s.f0_bound;
    if (!r.pass) r.note = "below b1: ||f0||_inf exceeds 1/2";
    rep.fits.push_back(r);
  }
  {
    double mn = 1.0, mx = 0.0;
    for (const auto& r : rep.rows) {
      mn = std::min(mn, r.psi_min);
      mx = std::max(mx, r.psi_max);
    }
    FitResult r{"psi_in_unit_interval", mx, 1.0, 0.0, mn >= 0.0 && mx <= 1.0 + 1e-15, ""};
    r.note = "min psi = " + detail::sci(mn);
    rep.fits.push_back(r);
  }
  {
    const double n = l2_norm(prof.w0);
    rep.fits.push_back({"w0_nonzero", n, s.w0_floor, 0.0, n > s.w0_floor, ""});
  }
  rep.fits.push_back(
      detail::rate_fit("w_convergence_rate", gv, rw, s.residual_target, s.delta_min));
  auto dv = detail::rate_fit("v_residual_rate", gv, rv, s.residual_target, s.delta_min);
  auto du = detail::rate_fit("u_residual_rate", tu, ru, s.residual_target, s.delta_min, -1.0);
  rep.fits.push_back(dv);
  rep.fits.push_back(du);
  {
    const double diff = std::abs(dv.estimate - du.estimate);
    FitResult r{"residual_rate_agreement", diff, 0.0, s.delta_agreement,
                diff <= s.delta_agreement, ""};
    rep.fits.push_back(r);
  }

  const auto& last = rep.rows.back();
  if (!p.dissipative()) {
    const double target = std::pow(p.b, -0.5 * N) * detail::sup_abs(prof.w0, s.window);
    const double rel = std::abs(last.t_u_sup / target - 1.0);
    rep.fits.push_back({"u_sup_limit", last.t_u_sup, target, s.limit_tolerance,
                        rel <= s.limit_tolerance, "relative error " + detail::sci(rel)});
  } else {
    const double rel = std::abs(last.v_sup / last.vtilde_sup - 1.0);
    rep.fits.push_back({"v_sup_matches_vtilde", last.v_sup, last.vtilde_sup, s.limit_tolerance,
                        rel <= s.limit_tolerance, "relative error " + detail::sci(rel)});
    std::vector<double> lv, lu;
    for (const auto& r : rep.rows)
      if (r.gap <= 10.0 * s.eps_end * (1 + 1e-9)) {
        lv.push_back(r.log_v_sup);
        lu.push_back(r.tlogt_u_sup);
      }
    const double a = p.alpha * std::abs(p.lambda.imag());
    rep.fits.push_back(
        detail::trend_check("log_v_sup_trend", lv, std::pow(p.b / a, 0.5 * N)));
    rep.fits.push_back(detail::trend_check("tlogt_u_sup_trend", lu, std::pow(a, -0.5 * N)));
  }
  return rep;
}

}  // namespace nlsmod
