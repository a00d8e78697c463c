#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "nlsmod/asymptotics.hpp"
#include "nlsmod/config.hpp"
#include "nlsmod/dynamics.hpp"
#include "nlsmod/io.hpp"
#include "nlsmod/norms.hpp"
#include "nlsmod/oracles.hpp"
#include "nlsmod/pseudoconformal.hpp"
#include "nlsmod/spectral.hpp"
#include "nlsmod/svg.hpp"

namespace nlsmod {

using Check = FitResult;
using nlohmann::json;

inline json to_json(const Check& c) {
  return json{{"name", c.name},       {"estimate", c.estimate}, {"target", c.target},
              {"tolerance", c.tolerance}, {"pass", c.pass},     {"note", c.note}};
}

/// c <x>^{-rho} times the edge taper.
inline Field make_alg_tail(const GridSpec& g, Complex c, double rho, double taper_fraction) {
  const auto taper = edge_taper(g, taper_fraction);
  const auto w = weight_field(g, -rho);
  Field f(g, Frame::V, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = c * w[i] * taper[i];
  return f;
}

/// The v-frame initial datum of the configuration.
inline Field make_initial_data(const RunConfig& c) {
  const auto& ic = c.initial;
  switch (ic.family) {
    case InitialFamily::AlgTail:
      return make_alg_tail(c.grid, ic.c, ic.rho, c.taper_fraction);
    case InitialFamily::AlgTailPlusGaussian: {
      const auto taper = edge_taper(c.grid, c.taper_fraction);
      const auto w = weight_field(c.grid, -ic.rho);
      const double bound = std::abs(ic.c) - ic.eps;
      Field f(c.grid, Frame::V, 0.0);
      for_each_point(c.grid, [&](std::size_t i, const Point& x) {
        const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        const double phi = ic.gauss_amplitude * std::exp(-r2 / (ic.gauss_width * ic.gauss_width));
        if (std::abs(phi) > bound * w[i]) {
          std::ostringstream os;
          os << "perturbation exceeds (|c| - eps) <x>^{-rho} at |x|^2 = " << r2;
          throw Error(os.str());
        }
        f[i] = (ic.c * w[i] + phi) * taper[i];
      });
      return f;
    }
    case InitialFamily::CustomFile: {
      auto s = io::read_snapshot(ic.file);
      if (!(s.field.grid == c.grid)) throw Error("initial.file grid does not match grid.* settings");
      s.field.frame = Frame::V;
      s.field.time = 0.0;
      require_finite(s.field, "initial.file data");
      return s.field;
    }
  }
  throw Error("unknown initial family");
}

struct KMeasurement {
  double proxy = 0.0;
  int truncated_at = -1;
  double inf = 0.0;
  double measured = 0.0;
  double K = 0.0;
};

/// Size of the datum (truncated space norm plus 1/inf) and the K used by the bound check.
inline KMeasurement measure_K(const Field& phi0, const RunConfig& c) {
  KMeasurement m;
  const auto proxy = space_norm_proxy(phi0, c.indices, c.monitor);
  m.proxy = proxy.value;
  m.truncated_at = proxy.truncated_at;
  m.inf = inf_weighted(phi0, c.indices.n, c.monitor.window);
  if (!(m.inf > 0.0)) throw Error("initial datum violates inf <x>^n |phi0| > 0 on the grid");
  m.measured = m.proxy + 1.0 / m.inf;
  if (c.K) {
    if (*c.K < m.measured) {
      std::ostringstream os;
      os << "norms.K = " << *c.K << " is below the measured size " << m.measured;
      throw Error(os.str());
    }
    m.K = *c.K;
  } else {
    m.K = c.K_headroom * m.measured;
  }
  return m;
}

struct FrameCheckResult {
  double error = 0.0;
  double error_half = 0.0;
  double order = 0.0;
  double tail_mass = 0.0;
  bool pass = false;
};

/// Evolves u under the autonomous equation and v under the transformed one over physical
/// [0, t_end], at the configured step and at half of it, and compares in the v-frame.
inline FrameCheckResult frame_equivalence_check(const RunConfig& c) {
  const auto& fc = c.frame_check;
  const auto& p = c.params;
  const GridSpec gv(p.dimension, fc.half_width, fc.points);
  const GridSpec gu(p.dimension, fc.u_half_width, fc.u_points);
  const Field v0 = make_alg_tail(gv, c.initial.c, c.initial.rho, c.taper_fraction);
  const Field u0 = u_from_v(v0, p, gu).field;
  const double tau_end = map_time(fc.t_end, TimeDirection::ToV, p.b);
  const Window win{fc.window};

  auto once = [&](double scale, double* tail) {
    StepSchedule sv = c.schedule;
    sv.dt_max *= scale;
    sv.endpoint_factor *= scale;
    sv.end_time = tau_end;
    sv.snapshot_times = {tau_end};
    StepSchedule su = sv;
    su.end_time = fc.t_end;
    su.snapshot_times = {fc.t_end};
    EvolveOptions opt;
    opt.dealias = c.dealias;
    const Field v = evolve(v0, p, sv, opt).snapshots.back();
    const Field u = evolve(u0, p, su, opt).snapshots.back();
    auto back = v_from_u(u, p, gv);
    if (tail) *tail = back.tail_mass_fraction;
    Field d = back.field;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= v[i];
    return l2_norm(d, win) / l2_norm(v, win);
  };
  FrameCheckResult r;
  r.error = once(1.0, &r.tail_mass);
  r.error_half = once(0.5, nullptr);
  r.order = std::log2(r.error / r.error_half);
  r.pass = r.error <= fc.tolerance && std::abs(r.order - 2.0) <= fc.order_tolerance;
  return r;
}

/// || e^{-it Delta}[F] - u+ ||_{L2} over |x| <= window * L for F(x) = a^{-1/2} e^{ib x^2/(4a)} S(x/a),
/// a = 1 + bt, in one dimension. The free flow is evaluated by Fresnel quadrature with one FFT
/// on a fine grid; u+ = e^{ib x^2/4} Q with Q = e^{-(i/b) Delta} w0 given on the v-grid.
inline double scattering_distance(const Field& S, const Field& Q, double t, const PhysParams& p,
                                  double window_fraction, int fine_points = 16384) {
  if (S.grid.dimension != 1) throw Error("scattering_distance is one-dimensional");
  if (!(t > 0.0)) throw Error("scattering_distance needs t > 0");
  const double a = 1.0 + p.b * t;
  const double L = S.grid.half_width;
  const int Mf = fine_points;
  const GridSpec fine(1, L, Mf);
  if (a * L / (2.0 * t) > 0.9 * std::numbers::pi * Mf / (2.0 * L))
    throw Error("scattering_distance: fine grid does not resolve the chirp at this time");
  Field H = resample_scaled(S, fine, 1.0).field;
  for (int j = 0; j < Mf; ++j) {
    const double eta = fine.coordinate(j);
    H[j] *= std::polar(1.0, -a * eta * eta / (4.0 * t));
  }
  fft::execute(H.values, 1, &Mf, FFTW_BACKWARD);

  const double dx = 2.0 * t * std::numbers::pi / (a * L);
  const GridSpec xs(1, 0.5 * Mf * dx, Mf);
  const Field Qx = resample_scaled(Q, xs, 1.0).field;
  const Complex pref = std::pow(Complex(0.0, -4.0 * std::numbers::pi * t), -0.5) * std::sqrt(a);
  const double h = fine.spacing();
  double acc = 0.0;
  for (int j = 0; j < Mf; ++j) {
    const int m = j - Mf / 2;
    const int src = m >= 0 ? m : m + Mf;
    const double kappa = std::numbers::pi * m / L;
    const double x = xs.coordinate(j);
    if (std::abs(x) > window_fraction * L) continue;
    const Complex E = pref * std::polar(1.0, -x * x / (4.0 * t)) * h * std::polar(1.0, -kappa * L) *
                      H[static_cast<std::size_t>(src)];
    const Complex up = std::polar(1.0, p.b * x * x / 4.0) * Qx[j];
    acc += std::norm(E - up);
  }
  return std::sqrt(acc * dx);
}

struct ScatteringCheck {
  std::vector<double> times;
  std::vector<double> z_distance;
  std::vector<double> u_distance;
  bool pass = false;
};

/// The modified-scattering distance at the last three snapshots (real lambda, N = 1).
inline ScatteringCheck scattering_check(const Trajectory& traj, const AsymptoticProfile& prof,
                                        double window_fraction) {
  const auto& p = prof.params;
  ScatteringCheck r;
  const Field Q = free_propagate(prof.w0, -1.0 / p.b);
  const std::size_t n = traj.snapshots.size();
  if (n < 3) throw Error("scattering check needs three snapshots");
  for (std::size_t k = n - 3; k < n; ++k) {
    const Field& v = traj.snapshots[k];
    const double t = map_time(v.time, TimeDirection::ToU, p.b);
    const double loga = std::log1p(p.b * t);
    Field Sz = prof.w0, Su = v;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double gamma = p.lambda.real() / p.b * std::pow(std::abs(prof.w0[i]), p.alpha) * loga;
      // Undo the logarithmic phase so the profile is compared without it.
      Su[i] *= std::polar(1.0, gamma);
    }
    r.times.push_back(t);
    r.z_distance.push_back(scattering_distance(Sz, Q, t, p, window_fraction));
    r.u_distance.push_back(scattering_distance(Su, Q, t, p, window_fraction));
  }
  r.pass = r.z_distance[1] < r.z_distance[0] && r.z_distance[2] < r.z_distance[1];
  return r;
}

/// theta by direct quadrature against (Re lambda / Im lambda) log psi at |log(1 - b tau)| = 5.
inline Check theta_identity_check(const AsymptoticProfile& prof, double tolerance) {
  const auto& p = prof.params;
  const double tau = -std::expm1(-5.0) / p.b;
  const auto psi = profile_eval(prof, tau, ProfileQuantity::Psi);
  double worst = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double quad = oracles::theta_by_quadrature(std::abs(prof.phi0[i]), prof.f0[i], tau, p);
    const double closed = p.lambda.real() / p.lambda.imag() * std::log(psi[i]);
    worst = std::max(worst, std::abs(quad - closed));
  }
  return {"theta_log_psi_identity", worst, 0.0, tolerance, worst <= tolerance, ""};
}

/// L2 mass along the run: non-increasing when dissipative, constant otherwise.
inline Check mass_check(const Trajectory& traj, double tolerance) {
  std::vector<double> m;
  for (const auto& s : traj.snapshots) m.push_back(l2_norm(s));
  if (traj.params.dissipative()) {
    double worst = 0.0;
    for (std::size_t k = 1; k < m.size(); ++k) worst = std::max(worst, (m[k] - m[k - 1]) / m[0]);
    return {"mass_non_increasing", worst, 0.0, 1e-14, worst <= 1e-14, ""};
  }
  double worst = 0.0;
  for (double x : m) worst = std::max(worst, std::abs(x / m[0] - 1.0));
  return {"mass_conserved", worst, 0.0, tolerance, worst <= tolerance, ""};
}

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::string> checkpoint;
  bool plots = false;
  bool write_outputs = true;
};

struct RunReport {
  json verdict;
  bool pass = false;
  bool complete = true;
  std::vector<Check> checks;
  KMeasurement K;
  CascadeExponents cascade;
  NormReport norms;
  AsymptoticReport asymptotics;
  AsymptoticProfile profile;
  Trajectory trajectory;
  std::optional<FrameCheckResult> frame;
  std::optional<ScatteringCheck> scattering;
};

namespace detail {

inline std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string norms_csv(const NormReport& r) {
  std::ostringstream os;
  if (r.rows.empty()) return "";
  os << "tau";
  const auto& first = r.rows.front();
  for (std::size_t j = 0; j < first.fam1.size(); ++j) os << ",fam1_" << j;
  for (std::size_t j = 0; j < first.fam2.size(); ++j) os << ",fam2_" << j;
  for (std::size_t j = 0; j < first.fam3.size(); ++j) os << ",fam3_" << j;
  os << ",inf_weighted,phi1,phi2,phi3,phi4,phi,psi\n";
  for (const auto& row : r.rows) {
    os << csv_number(row.tau);
    for (double v : row.fam1) os << ',' << csv_number(v);
    for (double v : row.fam2) os << ',' << csv_number(v);
    for (double v : row.fam3) os << ',' << csv_number(v);
    for (double v : {row.inf_weighted, row.phi1, row.phi2, row.phi3, row.phi4, row.phi, row.psi})
      os << ',' << csv_number(v);
    os << '\n';
  }
  return os.str();
}

inline std::string diagnostics_csv(const AsymptoticReport& r) {
  std::ostringstream os;
  os << "tau,t,gap,u_res_l2,u_res_linf_scaled,v_res_weighted,w_dist,t_u_sup,tlogt_u_sup,"
        "log_v_sup,v_sup,vtilde_sup,f_dist,psi_min,psi_max\n";
  for (const auto& d : r.rows) {
    bool first = true;
    for (double v : {d.tau, d.t, d.gap, d.u_res_l2, d.u_res_linf_scaled, d.v_res_weighted, d.w_dist, d.t_u_sup,
                     d.tlogt_u_sup, d.log_v_sup, d.v_sup, d.vtilde_sup, d.f_dist, d.psi_min,
                     d.psi_max}) {
      if (!first) os << ',';
      os << csv_number(v);
      first = false;
    }
    os << '\n';
  }
  return os.str();
}

inline Field real_to_field(const ScalarField& s, double time) {
  Field f(s.grid, Frame::V, time);
  for (std::size_t i = 0; i < s.size(); ++i) f[i] = s[i];
  return f;
}

inline void write_plots(const std::filesystem::path& dir, const RunReport& r, double b) {
  svg::Series vres{"v residual (weighted sup)", {}, {}}, ures{"u residual", {}, {}};
  svg::Series fd{"||f(t) - f0||", {}, {}};
  svg::Series lv{"|log(1-b tau)|^{N/2} ||v||", {}, {}}, vt{"||v||_inf", {}, {}},
      vtl{"||v-tilde||_inf", {}, {}};
  for (const auto& d : r.asymptotics.rows) {
    vres.x.push_back(d.gap);
    vres.y.push_back(d.v_res_weighted);
    ures.x.push_back(d.gap);
    ures.y.push_back(d.u_res_l2 + d.u_res_linf_scaled);
    fd.x.push_back(d.gap);
    fd.y.push_back(d.f_dist);
    lv.x.push_back(d.gap);
    lv.y.push_back(d.log_v_sup);
    vt.x.push_back(d.gap);
    vt.y.push_back(d.v_sup);
    vtl.x.push_back(d.gap);
    vtl.y.push_back(d.vtilde_sup);
  }
  io::write_atomic(dir / "residuals.svg",
                   svg::loglog_chart("residuals, b = " + csv_number(b), "1 - b tau", "residual",
                                     {vres, ures, fd}));
  io::write_atomic(dir / "limits.svg",
                   svg::loglog_chart("limit trends", "1 - b tau", "value", {lv, vt, vtl}));
  svg::Series psi{"Psi_T", {}, {}}, phi{"Phi_T", {}, {}};
  for (const auto& row : r.norms.rows) {
    psi.x.push_back(1.0 - b * row.tau);
    psi.y.push_back(row.psi);
    phi.x.push_back(1.0 - b * row.tau);
    phi.y.push_back(row.phi);
  }
  io::write_atomic(dir / "functionals.svg",
                   svg::loglog_chart("cascade functionals", "1 - b tau", "value", {psi, phi}));
}

}  // namespace detail

/// Builds phi0, evolves the v-frame run, and evaluates monitors, asymptotics and checks.
inline RunReport run_simulation(const RunConfig& c, const RunOptions& o = {}) {
  namespace fs = std::filesystem;
  RunReport R;
  const auto& p = c.params;
  const std::string hash = c.hash();
  const fs::path out = o.out_dir ? fs::path(*o.out_dir) : fs::path(c.output_dir);

  const Field phi0 = make_initial_data(c);
  R.K = measure_K(phi0, c);
  R.cascade = build_cascade(c.indices, p.alpha, c.sigma_bar);

  EvolveOptions eo;
  eo.dealias = c.dealias;
  eo.inf_floor = c.inf_floor;
  eo.weight_n = c.indices.n;
  eo.window = c.monitor.window;
  eo.halt_after_steps = c.halt_after_steps;
  if (o.checkpoint) {
    const fs::path ck(*o.checkpoint);
    if (io::checkpoint_exists(ck)) {
      eo.resume = io::read_checkpoint(ck, hash);
    } else if (fs::exists(ck)) {
      for (const auto& e : fs::directory_iterator(ck))
        if (e.path().filename().string().rfind("snap_", 0) == 0) fs::remove(e.path());
    }
    eo.checkpoint_every = c.checkpoint_every;
    eo.on_checkpoint = [ck, b = p.b, hash](const IntegratorState& st) {
      io::write_checkpoint(ck, st, b, hash);
    };
  }
  R.trajectory = evolve(phi0, p, c.schedule, eo);
  R.trajectory.provenance = "config " + hash + "; seedless, deterministic plans";
  R.complete = R.trajectory.complete;

  json verdict;
  verdict["config"] = c.resolved();
  verdict["provenance"] = {{"config_hash", hash}, {"determinism", "seedless"}};
  verdict["steps"] = R.trajectory.steps_taken;
  verdict["snapshots"] = R.trajectory.snapshots.size();
  verdict["complete"] = R.complete;
  verdict["K"] = {{"space_norm_proxy", R.K.proxy},
                  {"inf_weighted", R.K.inf},
                  {"measured", R.K.measured},
                  {"K", R.K.K},
                  {"truncated_at_order", R.K.truncated_at}};
  json flags = R.trajectory.flags;

  if (!R.complete) {
    verdict["flags"] = flags;
    verdict["checks"] = json::array();
    verdict["pass"] = false;
    verdict["note"] = "run halted after " + std::to_string(R.trajectory.steps_taken) +
                      " steps; resume from the checkpoint";
    R.verdict = verdict;
    if (o.write_outputs) io::write_json(out / "verdict.json", verdict);
    return R;
  }

  R.checks.push_back(mass_check(R.trajectory, c.mass_tolerance));

  if (p.lambda == Complex(0.0)) {
    // Free evolution: only linear checks apply.
    const Field& last = R.trajectory.snapshots.back();
    const Field exact = free_propagate(phi0, last.time);
    const double err = relative_l2_distance(last, exact);
    R.checks.push_back({"free_flow_match", err, 0.0, 1e-9, err <= 1e-9, ""});
  } else {
    R.norms = functionals_phi_psi(R.trajectory, R.cascade, c.indices, R.K.K, c.monitor,
                                  c.monitor_stop);
    {
      Check ck{"psi_within_4K", R.norms.final_psi(), 4.0 * R.K.K, 0.0, R.norms.psi_within_4K, ""};
      if (R.norms.truncated_at >= 0)
        ck.note = "monitored orders <= " + std::to_string(R.norms.truncated_at);
      R.checks.push_back(ck);
    }
    for (const auto& f : R.norms.flags) flags.push_back(f);

    auto fa = accumulate_f(R.trajectory, phi0, p, 1.0 - R.cascade[3]);
    R.profile.params = p;
    R.profile.phi0 = phi0;
    R.profile.f_times = fa.times;
    R.profile.f_t = std::move(fa.f_t);
    R.profile.f0 = fa.f0;
    if (fa.masked > 0) flags.push_back("L masked at " + std::to_string(fa.masked) + " points");
    // The taper zone carries no asymptotic information; f is reset to 0 there.
    bool below = false;
    for_each_point(c.grid, [&](std::size_t i, const Point& x) {
      if (c.monitor.window.contains(c.grid, x)) {
        if (!(1.0 + R.profile.f0[i] > 0.0)) below = true;
        return;
      }
      R.profile.f0[i] = 0.0;
      for (auto& ft : R.profile.f_t) ft[i] = 0.0;
    });
    if (below) {
      flags.push_back("1 + f0 <= 0 somewhere: run below threshold, profiles not evaluated");
      R.checks.push_back({"f0_sup_bound", R.profile.f0_sup(c.monitor.window),
                          c.tolerances.f0_bound, 0.0, false, "below b1"});
    } else {
      extract_w0(R.trajectory, R.profile, 1.0 - R.cascade[R.cascade.J], c.indices.n,
                 c.monitor.window);
      for (const auto& f : R.profile.flags) flags.push_back(f);
      AsymptoticSettings s = c.tolerances;
      s.f_rate_target = 1.0 - R.cascade[3];
      s.residual_target = 1.0 - R.cascade[R.cascade.J];
      const Trajectory tu = map_trajectory_to_u(R.trajectory);
      R.asymptotics = residual_and_limits(tu, R.trajectory, R.profile, s);
      for (const auto& f : R.asymptotics.fits) R.checks.push_back(f);
      {
        // ||<x>^n v-tilde||_inf <= 2^{1/alpha} K along the run.
        double worst = 0.0;
        const auto wn = weight_field(c.grid, c.indices.n);
        for (const auto& v : R.trajectory.snapshots) {
          const auto vt = profile_eval(R.profile, v.time, ProfileQuantity::VTilde);
          for_each_point(c.grid, [&](std::size_t i, const Point& x) {
            if (c.monitor.window.contains(c.grid, x)) worst = std::max(worst, wn[i] * vt[i]);
          });
        }
        const double bound = std::pow(2.0, 1.0 / p.alpha) * R.K.K;
        R.checks.push_back({"vtilde_weighted_bound", worst, bound, 0.0, worst <= bound, ""});
      }
      if (!p.dissipative()) {
        // psi = 1, so |w0|^alpha (1 + f0) = |phi0|^alpha pointwise.
        double worst = 0.0, scale = 0.0;
        for_each_point(c.grid, [&](std::size_t i, const Point& x) {
          if (!c.monitor.window.contains(c.grid, x)) return;
          const double pa = std::pow(std::abs(phi0[i]), p.alpha);
          const double wa = std::pow(std::abs(R.profile.w0[i]), p.alpha);
          worst = std::max(worst, std::abs(wa * (1.0 + R.profile.f0[i]) - pa));
          scale = std::max(scale, pa);
        });
        const double rel = worst / scale;
        R.checks.push_back({"w0_modulus_identity", rel, 0.0, c.modulus_tolerance,
                            rel <= c.modulus_tolerance, ""});
      }
      R.checks.push_back({"w0_convergent", R.profile.w_increments.empty()
                                               ? 0.0
                                               : R.profile.w_increments.back(),
                          0.0, 0.0, R.profile.w_convergent, ""});
      if (p.dissipative()) R.checks.push_back(theta_identity_check(R.profile, c.theta_tolerance));
      if (c.scattering_check && p.dimension == 1 && !p.dissipative()) {
        R.scattering = scattering_check(R.trajectory, R.profile, c.monitor.window.fraction);
        const auto& sc = *R.scattering;
        Check ck{"scattering_distance_decreasing", sc.z_distance.back(), 0.0, 0.0, sc.pass, ""};
        std::ostringstream os;
        os << std::setprecision(6) << "z-based " << sc.z_distance[0] << " > " << sc.z_distance[1]
           << " > " << sc.z_distance[2] << "; u-based " << sc.u_distance[0] << ", "
           << sc.u_distance[1] << ", " << sc.u_distance[2];
        ck.note = os.str();
        R.checks.push_back(ck);
      }
    }
  }

  if (c.frame_check.enabled) {
    R.frame = frame_equivalence_check(c);
    std::ostringstream os;
    os << std::setprecision(6) << "error at dt/2 " << R.frame->error_half << ", observed order "
       << R.frame->order;
    R.checks.push_back({"frame_equivalence", R.frame->error, 0.0, c.frame_check.tolerance,
                        R.frame->pass, os.str()});
  }

  R.pass = true;
  json checks = json::array();
  for (const auto& ck : R.checks) {
    checks.push_back(to_json(ck));
    R.pass = R.pass && ck.pass;
  }
  verdict["checks"] = checks;
  verdict["flags"] = flags;
  verdict["pass"] = R.pass;
  R.verdict = verdict;

  if (o.write_outputs) {
    fs::create_directories(out);
    io::write_json(out / "verdict.json", verdict);
    if (!R.norms.rows.empty()) {
      io::write_atomic(out / "norms.csv", detail::norms_csv(R.norms));
      io::write_json(out / "norms.json", json{{"final_psi", R.norms.final_psi()},
                                              {"K", R.norms.K},
                                              {"psi_within_4K", R.norms.psi_within_4K},
                                              {"first_violation_row", R.norms.first_violation},
                                              {"truncated_at_order", R.norms.truncated_at},
                                              {"flags", R.norms.flags}});
    }
    if (!R.asymptotics.rows.empty()) {
      io::write_atomic(out / "diagnostics.csv", detail::diagnostics_csv(R.asymptotics));
      json fits = json::array();
      for (const auto& f : R.asymptotics.fits) fits.push_back(to_json(f));
      io::write_json(out / "fits.json", fits);
      io::write_snapshot(out / "profile" / "phi0", phi0, p.b);
      io::write_snapshot(out / "profile" / "w0", R.profile.w0, p.b);
      io::write_snapshot(out / "profile" / "f0", detail::real_to_field(R.profile.f0, 1.0 / p.b),
                         p.b);
      if (p.dimension == 1) {
        io::write_csv_1d(out / "profile" / "w0.csv", R.profile.w0);
        io::write_csv_1d(out / "profile" / "f0.csv", detail::real_to_field(R.profile.f0, 1.0 / p.b));
      }
    }
    if (c.write_snapshots) {
      for (std::size_t k = 0; k < R.trajectory.snapshots.size(); ++k) {
        std::ostringstream name;
        name << "v_" << std::setw(5) << std::setfill('0') << k;
        io::write_snapshot(out / "snapshots" / name.str(), R.trajectory.snapshots[k], p.b);
      }
    }
    if ((o.plots || c.plots) && !R.asymptotics.rows.empty()) {
      try {
        detail::write_plots(out / "plots", R, p.b);
      } catch (const std::exception&) {
        // Plotting never gates the run.
      }
    }
  }
  return R;
}

/// Worker count from NLSMOD_WORKERS, else the hardware concurrency.
inline unsigned worker_count() {
  if (const char* s = std::getenv("NLSMOD_WORKERS")) {
    const int n = std::atoi(s);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct SweepRow {
  double b = 0.0;
  double psi_max = 0.0;
  bool psi_flag = false;
  double f0_sup = 0.0;
  bool f0_flag = false;
  bool pass = false;
  std::string error;
  json verdict;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::optional<double> b0_hat, b1_hat;
  std::vector<std::string> flags;
  json to_json() const;
};

inline json SweepTable::to_json() const {
  json rows_j = json::array();
  for (const auto& r : rows)
    rows_j.push_back(json{{"b", r.b},           {"psi_max", r.psi_max}, {"psi_within_4K", r.psi_flag},
                          {"f0_sup", r.f0_sup}, {"f0_within_half", r.f0_flag},
                          {"pass", r.pass},     {"error", r.error}});
  json j{{"rows", rows_j}, {"flags", flags}};
  j["b0_hat"] = b0_hat ? json(*b0_hat) : json(nullptr);
  j["b1_hat"] = b1_hat ? json(*b1_hat) : json(nullptr);
  if (!b1_hat) j["threshold"] = "no threshold in range";
  return j;
}

/// Runs the configuration at every b (in parallel) and tabulates the threshold flags.
inline SweepTable sweep_b(const RunConfig& base, std::vector<double> b_values,
                          unsigned workers = worker_count()) {
  if (b_values.size() < 2) throw Error("sweep needs at least two b values");
  if (!std::is_sorted(b_values.begin(), b_values.end())) throw Error("sweep b values must be sorted");
  SweepTable table;
  table.rows.resize(b_values.size());
  auto one = [&](std::size_t i) {
    SweepRow row;
    row.b = b_values[i];
    try {
      auto kv = base.source;
      kv["physics.b"] = detail::fmt(b_values[i]);
      const RunConfig c = config_from_map(kv);
      RunOptions o;
      o.write_outputs = false;
      auto r = run_simulation(c, o);
      row.psi_max = r.norms.final_psi();
      row.psi_flag = r.norms.psi_within_4K;
      row.f0_sup = r.profile.f0.values.empty() ? std::nan("") : r.profile.f0_sup(c.monitor.window);
      row.f0_flag = row.f0_sup <= c.tolerances.f0_bound;
      row.pass = r.pass;
      row.verdict = r.verdict;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    table.rows[i] = std::move(row);
  };
  std::size_t next = 0;
  while (next < b_values.size()) {
    std::vector<std::future<void>> batch;
    for (unsigned w = 0; w < workers && next < b_values.size(); ++w, ++next)
      batch.push_back(std::async(std::launch::async, one, next));
    for (auto& f : batch) f.get();
  }
  for (const auto& r : table.rows) {
    if (!table.b0_hat && r.psi_flag) table.b0_hat = r.b;
    if (!table.b1_hat && r.psi_flag && r.f0_flag) table.b1_hat = r.b;
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t j = i + 1; j < table.rows.size(); ++j) {
      const auto &lo = table.rows[i], &hi = table.rows[j];
      if (lo.f0_flag && !hi.f0_flag)
        table.flags.push_back("f0 bound holds at b = " + detail::fmt(lo.b) + " but fails at b = " +
                              detail::fmt(hi.b));
      if (lo.psi_flag && !hi.psi_flag)
        table.flags.push_back("4K bound holds at b = " + detail::fmt(lo.b) + " but fails at b = " +
                              detail::fmt(hi.b));
    }
  if (!table.b1_hat) table.flags.push_back("no threshold in range");
  return table;
}

/// Oracle and invariant suites that need no PDE run; one check per line item.
inline std::vector<Check> verify_suite(const RunConfig& c) {
  std::vector<Check> out;
  const auto& p = c.params;
  {
    GridSpec g(1, 40.0, 1024);
    const Field u0 = oracles::gaussian_free_solution(0.0, g, 1.0);
    const Field num = free_propagate(u0, 0.5);
    const Field ref = oracles::gaussian_free_solution(0.5, g, 1.0);
    const double e = relative_l2_distance(num, ref);
    out.push_back({"gaussian_free_propagation", e, 0.0, 1e-8, e <= 1e-8, ""});
    const double s = std::abs(sup_norm(num) - std::pow(5.0, -0.25));
    out.push_back({"gaussian_sup_norm", s, 0.0, 1e-8, s <= 1e-8, ""});
  }
  {
    double worst = 0.0;
    for (auto [mu, b, t] : {std::tuple{1.0, 2.0, 0.25}, {0.5, 1.0, 0.99}, {3.0, 1.0, 0.9}}) {
      auto [lhs, rhs] = oracles::check_integral_identity(mu, b, t);
      worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
    }
    out.push_back({"integral_identity", worst, 0.0, 1e-10, worst <= 1e-10, ""});
  }
  {
    const auto q = PhysParams::make(1, Complex(0.0, -1.0), 1.0);
    const Complex z = oracles::ode_closed_form(-std::expm1(-1.0), 1.0, q);
    const double e = std::abs(std::abs(z) - 1.0 / std::sqrt(3.0));
    out.push_back({"ode_closed_form_modulus", e, 0.0, 1e-14, e <= 1e-14, ""});
  }
  {
    const auto cas = build_cascade(c.indices, p.alpha, c.sigma_bar);
    bool ok = cas[0] == 0.0 && cas[cas.J] < 1.0;
    for (int j = 1; j <= cas.J; ++j) ok = ok && cas[j] > cas[j - 1];
    out.push_back({"cascade_invariants", cas[cas.J], 1.0, 0.0, ok, ""});
  }
  {
    const Field phi0 = make_initial_data(c);
    const double m = inf_weighted(phi0, c.indices.n, c.monitor.window);
    out.push_back({"initial_inf_positive", m, 0.0, 0.0, m > 0.0, ""});
    Field v = phi0;
    v.time = 0.25 / p.b;
    const auto u = u_from_v(v, p);
    const auto back = v_from_u(u.field, p, v.grid);
    const double e = relative_l2_distance(back.field, v);
    out.push_back({"pseudoconformal_round_trip", e, 0.0, 1e-10, e <= 1e-10, ""});
    const double iso = std::abs(l2_norm(u.field) / l2_norm(v) - 1.0);
    out.push_back({"pseudoconformal_isometry", iso, 0.0, 1e-10, iso <= 1e-10, ""});
  }
  return out;
}

}  // namespace nlsmod
