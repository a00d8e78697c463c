#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nlsmod/asymptotics.hpp"
#include "nlsmod/grid.hpp"
#include "nlsmod/norms.hpp"
#include "nlsmod/params.hpp"
#include "nlsmod/trajectory.hpp"

namespace nlsmod {

enum class InitialFamily { AlgTail, AlgTailPlusGaussian, CustomFile };

inline const char* to_string(InitialFamily f) {
  switch (f) {
    case InitialFamily::AlgTail: return "ALG_TAIL";
    case InitialFamily::AlgTailPlusGaussian: return "ALG_TAIL_PLUS_GAUSSIAN";
    case InitialFamily::CustomFile: return "CUSTOM_FILE";
  }
  return "?";
}

struct InitialDataConfig {
  InitialFamily family = InitialFamily::AlgTail;
  Complex c{1.0, 0.0};
  double rho = 1.0;              ///< decay exponent of c <x>^{-rho}
  double eps = 0.1;              ///< margin of the perturbation bound
  double gauss_amplitude = 0.5;
  double gauss_width = 1.0;
  std::string file;              ///< snapshot base path for CUSTOM_FILE
};

/// The u-frame cross-run used for the frame-equivalence check.
struct FrameCheckConfig {
  bool enabled = false;
  double half_width = 20.0;
  int points = 512;
  double u_half_width = 512.0;
  int u_points = 131072;
  double t_end = 1.0;
  double tolerance = 1e-6;
  double order_tolerance = 0.3;
  /// Comparison window; the periodic v-box edge pollutes the outer band.
  double window = 0.7;
};

struct RunConfig {
  PhysParams params;
  RegularityIndices indices;
  GridSpec grid;
  double taper_fraction = 0.1;
  StepSchedule schedule;
  int per_decade = 10;
  int early = 20;
  double first_decade = 1.0;
  double sigma_bar = 0.0;
  double display_top = 0.9;
  InitialDataConfig initial;
  std::optional<double> K;
  double K_headroom = 1.2;
  MonitorSettings monitor;
  double inf_floor = 1e-12;
  double monitor_stop = 1e-4;
  bool dealias = false;
  FrameCheckConfig frame_check;
  bool scattering_check = false;
  AsymptoticSettings tolerances;
  double theta_tolerance = 1e-12;
  double mass_tolerance = 1e-8;
  double modulus_tolerance = 1e-3;
  std::string output_dir = "out";
  bool write_snapshots = false;
  bool plots = false;
  long checkpoint_every = 0;
  long halt_after_steps = -1;
  /// The key/value pairs this configuration was built from.
  std::map<std::string, std::string> source;

  /// Every key with its resolved value, in a canonical order.
  std::map<std::string, std::string> resolved() const;
  /// FNV-1a of the resolved configuration text.
  std::string hash() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt(Complex z) { return fmt(z.real()) + "," + fmt(z.imag()); }

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* b = v.data();
  const char* e = b + v.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || ptr != e) throw Error("config: " + key + " = '" + v + "' is not a number");
  return out;
}

inline long parse_long(const std::string& key, const std::string& v) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw Error("config: " + key + " = '" + v + "' is not an integer");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("config: " + key + " = '" + v + "' is not a boolean");
}

/// "re,im" or a bare real.
inline Complex parse_complex(const std::string& key, const std::string& v) {
  const auto comma = v.find(',');
  if (comma == std::string::npos) return {parse_double(key, trim(v)), 0.0};
  return {parse_double(key, trim(v.substr(0, comma))), parse_double(key, trim(v.substr(comma + 1)))};
}

}  // namespace detail

/// Parses "key = value" lines; '#' starts a comment. Duplicate keys are an error.
inline std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                           const std::string& origin = "config") {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw Error(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, val).second)
      throw Error(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return kv;
}

/// Builds a validated RunConfig. Unknown keys are rejected so typos do not pass silently.
inline RunConfig config_from_map(const std::map<std::string, std::string>& kv) {
  std::set<std::string> used;
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    used.insert(key);
    return it->second;
  };
  auto num = [&](const std::string& key, double def) {
    auto v = get(key);
    return v ? detail::parse_double(key, *v) : def;
  };
  auto integer = [&](const std::string& key, long def) {
    auto v = get(key);
    return v ? detail::parse_long(key, *v) : def;
  };
  auto flag = [&](const std::string& key, bool def) {
    auto v = get(key);
    return v ? detail::parse_bool(key, *v) : def;
  };
  auto text = [&](const std::string& key, const std::string& def) {
    auto v = get(key);
    return v ? *v : def;
  };

  RunConfig c;
  c.source = kv;
  const int N = static_cast<int>(integer("physics.dimension", 1));
  if (N < 1 || N > 3) throw Error("config: physics.dimension must be 1, 2 or 3");
  const Complex lambda = [&] {
    auto v = get("physics.lambda");
    return v ? detail::parse_complex("physics.lambda", *v) : Complex(0.0, -1.0);
  }();
  c.params = PhysParams::make(N, lambda, num("physics.b", 20.0));

  const auto minimal = RegularityIndices::minimal(N);
  c.indices.k = static_cast<int>(integer("indices.k", minimal.k));
  c.indices.m = static_cast<int>(integer("indices.m", minimal.m));
  c.indices.n = static_cast<int>(integer("indices.n", minimal.n));
  c.indices.validate(N);

  const int default_points = N == 1 ? 1024 : (N == 2 ? 256 : 64);
  c.grid = GridSpec(N, num("grid.half_width", 40.0),
                    static_cast<int>(integer("grid.points", default_points)));
  c.taper_fraction = num("grid.taper_fraction", 0.1);
  if (c.taper_fraction < 0.0 || c.taper_fraction >= 1.0)
    throw Error("config: grid.taper_fraction must lie in [0, 1)");

  c.schedule.dt_max = num("schedule.dt_max", 1.25e-4);
  c.schedule.endpoint_factor = num("schedule.endpoint_factor", 0.01);
  c.schedule.eps_end = num("schedule.eps_end", 1e-6);
  c.per_decade = static_cast<int>(integer("schedule.per_decade", 10));
  c.early = static_cast<int>(integer("schedule.early", 20));
  c.first_decade = num("schedule.first_decade", 1.0);
  if (c.per_decade < 1) throw Error("config: schedule.per_decade must be >= 1");
  c.schedule.snapshot_times =
      clustered_snapshot_times(c.params, c.schedule.eps_end, c.per_decade, c.early, c.first_decade);
  c.schedule.validate(c.params, Frame::V);

  c.sigma_bar = num("cascade.sigma_bar", default_sigma_bar(c.indices, c.params.alpha));
  c.display_top = num("cascade.display_top", 0.9);
  build_cascade(c.indices, c.params.alpha, c.sigma_bar);

  const std::string fam = text("initial.family", "ALG_TAIL");
  if (fam == "ALG_TAIL") c.initial.family = InitialFamily::AlgTail;
  else if (fam == "ALG_TAIL_PLUS_GAUSSIAN") c.initial.family = InitialFamily::AlgTailPlusGaussian;
  else if (fam == "CUSTOM_FILE") c.initial.family = InitialFamily::CustomFile;
  else throw Error("config: unknown initial.family '" + fam + "'");
  if (auto v = get("initial.c")) c.initial.c = detail::parse_complex("initial.c", *v);
  if (c.initial.c == Complex(0.0)) throw Error("config: initial.c must be nonzero");
  c.initial.rho = num("initial.rho", static_cast<double>(N));
  if (c.initial.rho > c.indices.n)
    throw Error("config: initial.rho must not exceed indices.n (else inf <x>^n |phi0| = 0)");
  c.initial.eps = num("initial.eps", 0.1);
  c.initial.gauss_amplitude = num("initial.gauss_amplitude", 0.5);
  c.initial.gauss_width = num("initial.gauss_width", 1.0);
  c.initial.file = text("initial.file", "");
  if (c.initial.family == InitialFamily::AlgTailPlusGaussian &&
      !(c.initial.eps > 0.0 && c.initial.eps < std::abs(c.initial.c)))
    throw Error("config: initial.eps must lie in (0, |c|)");
  if (c.initial.family == InitialFamily::CustomFile && c.initial.file.empty())
    throw Error("config: CUSTOM_FILE needs initial.file");

  if (auto v = get("norms.K")) {
    if (*v != "auto") c.K = detail::parse_double("norms.K", *v);
  }
  c.K_headroom = num("norms.K_headroom", 1.2);
  c.monitor.order_cap = static_cast<int>(integer("monitor.order_cap", 4));
  const std::string method = text("monitor.method", "spectral");
  if (method == "spectral") c.monitor.method = DerivativeMethod::Spectral;
  else if (method == "fd8") c.monitor.method = DerivativeMethod::FiniteDifference8;
  else throw Error("config: monitor.method must be spectral or fd8");
  c.monitor.window.fraction = num("monitor.window", 1.0 - c.taper_fraction);
  c.inf_floor = num("monitor.inf_floor", 1e-12);
  c.monitor_stop = num("monitor.stop_distance", 1e-4);
  c.dealias = flag("run.dealias", false);

  c.frame_check.enabled = flag("frame_check.enabled", false);
  c.frame_check.half_width = num("frame_check.half_width", 20.0);
  c.frame_check.points = static_cast<int>(integer("frame_check.points", 512));
  c.frame_check.u_half_width = num("frame_check.u_half_width", 512.0);
  c.frame_check.u_points = static_cast<int>(integer("frame_check.u_points", 131072));
  c.frame_check.t_end = num("frame_check.t_end", 1.0);
  c.frame_check.tolerance = num("frame_check.tolerance", 1e-6);
  c.frame_check.order_tolerance = num("frame_check.order_tolerance", 0.3);
  c.frame_check.window = num("frame_check.window", 0.7);
  c.scattering_check = flag("scattering_check.enabled", !c.params.dissipative() && N == 1);

  auto& t = c.tolerances;
  t.weight_n = c.indices.n;
  t.window = c.monitor.window;
  t.eps_end = c.schedule.eps_end;
  t.fit_lower_factor = num("fit.lower_factor", 100.0);
  t.fit_upper = num("fit.upper", 1e-2);
  t.f_fit_upper = num("fit.f_upper", 1e-1);
  t.f_rate_min = num("tol.f_rate_min", 0.85);
  t.delta_min = num("tol.delta_min", 0.8);
  t.delta_agreement = num("tol.delta_agreement", 0.1);
  t.limit_tolerance = num("tol.limit", 0.02);
  t.f0_bound = num("tol.f0_bound", 0.5);
  t.w0_floor = num("tol.w0_floor", 1e-6);
  c.theta_tolerance = num("tol.theta", 1e-12);
  c.mass_tolerance = num("tol.mass", 1e-8);
  c.modulus_tolerance = num("tol.modulus", 1e-3);

  c.output_dir = text("output.dir", "out");
  c.write_snapshots = flag("output.snapshots", false);
  c.plots = flag("output.plots", false);
  c.checkpoint_every = integer("run.checkpoint_every", 0);
  c.halt_after_steps = integer("run.halt_after_steps", -1);

  for (const auto& [k, v] : kv)
    if (!used.count(k)) throw Error("config: unknown key '" + k + "'");
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_map(parse_key_values(ss.str(), path.string()));
}

inline std::map<std::string, std::string> RunConfig::resolved() const {
  using detail::fmt;
  std::map<std::string, std::string> m;
  m["physics.dimension"] = std::to_string(params.dimension);
  m["physics.lambda"] = fmt(params.lambda);
  m["physics.b"] = fmt(params.b);
  m["indices.k"] = std::to_string(indices.k);
  m["indices.m"] = std::to_string(indices.m);
  m["indices.n"] = std::to_string(indices.n);
  m["grid.half_width"] = fmt(grid.half_width);
  m["grid.points"] = std::to_string(grid.points);
  m["grid.taper_fraction"] = fmt(taper_fraction);
  m["schedule.dt_max"] = fmt(schedule.dt_max);
  m["schedule.endpoint_factor"] = fmt(schedule.endpoint_factor);
  m["schedule.eps_end"] = fmt(schedule.eps_end);
  m["schedule.per_decade"] = std::to_string(per_decade);
  m["schedule.early"] = std::to_string(early);
  m["schedule.first_decade"] = fmt(first_decade);
  m["cascade.sigma_bar"] = fmt(sigma_bar);
  m["cascade.display_top"] = fmt(display_top);
  m["initial.family"] = to_string(initial.family);
  m["initial.c"] = fmt(initial.c);
  m["initial.rho"] = fmt(initial.rho);
  m["initial.eps"] = fmt(initial.eps);
  m["initial.gauss_amplitude"] = fmt(initial.gauss_amplitude);
  m["initial.gauss_width"] = fmt(initial.gauss_width);
  m["initial.file"] = initial.file;
  m["norms.K"] = K ? fmt(*K) : "auto";
  m["norms.K_headroom"] = fmt(K_headroom);
  m["monitor.order_cap"] = std::to_string(monitor.order_cap);
  m["monitor.method"] = monitor.method == DerivativeMethod::Spectral ? "spectral" : "fd8";
  m["monitor.window"] = fmt(monitor.window.fraction);
  m["monitor.inf_floor"] = fmt(inf_floor);
  m["monitor.stop_distance"] = fmt(monitor_stop);
  m["run.dealias"] = dealias ? "true" : "false";
  m["frame_check.enabled"] = frame_check.enabled ? "true" : "false";
  m["frame_check.half_width"] = fmt(frame_check.half_width);
  m["frame_check.points"] = std::to_string(frame_check.points);
  m["frame_check.u_half_width"] = fmt(frame_check.u_half_width);
  m["frame_check.u_points"] = std::to_string(frame_check.u_points);
  m["frame_check.t_end"] = fmt(frame_check.t_end);
  m["frame_check.tolerance"] = fmt(frame_check.tolerance);
  m["frame_check.order_tolerance"] = fmt(frame_check.order_tolerance);
  m["frame_check.window"] = fmt(frame_check.window);
  m["scattering_check.enabled"] = scattering_check ? "true" : "false";
  m["fit.lower_factor"] = fmt(tolerances.fit_lower_factor);
  m["fit.upper"] = fmt(tolerances.fit_upper);
  m["fit.f_upper"] = fmt(tolerances.f_fit_upper);
  m["tol.f_rate_min"] = fmt(tolerances.f_rate_min);
  m["tol.delta_min"] = fmt(tolerances.delta_min);
  m["tol.delta_agreement"] = fmt(tolerances.delta_agreement);
  m["tol.limit"] = fmt(tolerances.limit_tolerance);
  m["tol.f0_bound"] = fmt(tolerances.f0_bound);
  m["tol.w0_floor"] = fmt(tolerances.w0_floor);
  m["tol.theta"] = fmt(theta_tolerance);
  m["tol.mass"] = fmt(mass_tolerance);
  m["tol.modulus"] = fmt(modulus_tolerance);
  m["output.dir"] = output_dir;
  m["output.snapshots"] = write_snapshots ? "true" : "false";
  m["output.plots"] = plots ? "true" : "false";
  m["run.checkpoint_every"] = std::to_string(checkpoint_every);
  m["run.halt_after_steps"] = std::to_string(halt_after_steps);
  return m;
}

inline std::string RunConfig::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& [k, v] : resolved()) {
    // Output location and run-control keys do not change the physics.
    if (k.rfind("output.", 0) == 0 || k == "run.halt_after_steps" || k == "run.checkpoint_every")
      continue;
    for (char ch : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nlsmod
