#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nlsmod/grid.hpp"
#include "nlsmod/spectral.hpp"
#include "nlsmod/trajectory.hpp"

namespace nlsmod {

/// The integers (k, m, n) fixing the regularity of the solution space, with
/// J = 2m + 2 + k + n. n is the polynomial weight exponent.
struct RegularityIndices {
  int k = 1;
  int m = 2;
  int n = 2;

  int J() const { return 2 * m + 2 + k + n; }

  /// Human-readable list of the violated admissibility inequalities (empty when valid).
  std::vector<std::string> violations(int dimension) const {
    std::vector<std::string> out;
    const double N = dimension;
    const double alpha = 2.0 / N;
    const double n_floor = std::max(N / 2.0 + 1.0, N / (2.0 * alpha));
    if (!(k > N / 2.0)) out.push_back("k > N/2 fails (k=" + std::to_string(k) + ")");
    if (!(n > n_floor)) {
      std::ostringstream os;
      os << "n > max{N/2+1, N/(2 alpha)} = " << n_floor << " fails (n=" << n << ")";
      out.push_back(os.str());
    }
    if (!(2 * m >= k + n + 1)) out.push_back("2m >= k + n + 1 fails");
    return out;
  }

  void validate(int dimension) const {
    auto v = violations(dimension);
    if (!v.empty()) {
      std::string msg = "invalid regularity indices:";
      for (auto& s : v) msg += " " + s + ";";
      throw Error(msg);
    }
  }

  /// Smallest admissible indices for the dimension.
  static RegularityIndices minimal(int dimension) {
    const double N = dimension;
    const double n_floor = std::max(N / 2.0 + 1.0, N * N / 4.0);
    RegularityIndices r;
    r.k = static_cast<int>(std::floor(N / 2.0)) + 1;
    r.n = static_cast<int>(std::floor(n_floor)) + 1;
    r.m = (r.k + r.n + 2) / 2;
    return r;
  }
};

/// sigma_0 = 0, sigma_j = (4J + 2 alpha + 2)^j * sigma_bar for 1 <= j <= J.
struct CascadeExponents {
  double sigma_bar = 0.0;
  int J = 0;
  double alpha = 0.0;
  std::vector<double> sigma;
  bool display_only = false;

  double ratio() const { return 4.0 * J + 2.0 * alpha + 2.0; }

  static double admissibility_bound(int J, double alpha) {
    return std::pow(4.0 * J + 2.0 * alpha + 1.0, -static_cast<double>(J));
  }

  double operator[](int j) const { return sigma.at(static_cast<std::size_t>(j)); }
};

namespace detail {

inline CascadeExponents make_cascade(int J, double alpha, double sigma_bar) {
  CascadeExponents c;
  c.sigma_bar = sigma_bar;
  c.J = J;
  c.alpha = alpha;
  c.sigma.assign(static_cast<std::size_t>(J) + 1, 0.0);
  double s = sigma_bar;
  for (int j = 1; j <= J; ++j) {
    s *= c.ratio();
    c.sigma[j] = s;
  }
  for (int j = 1; j <= J; ++j) {
    if (!(c.sigma[j] > (j == 1 ? sigma_bar : c.sigma[j - 1])))
      throw Error("cascade is not strictly increasing");
  }
  if (!(c.sigma[J] < 1.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "cascade top exponent sigma_J = " << c.sigma[J] << " is not < 1 for sigma_bar = "
       << sigma_bar << "; need sigma_bar < " << std::pow(c.ratio(), -static_cast<double>(J));
    throw Error(os.str());
  }
  return c;
}

}  // namespace detail

inline double default_sigma_bar(const RegularityIndices& idx, double alpha) {
  return 0.5 * CascadeExponents::admissibility_bound(idx.J(), alpha);
}

/// Builds the admissible cascade; rejects sigma_bar outside (0, (4J+2 alpha+1)^{-J})
/// or any sigma_bar that would push sigma_J to 1 or beyond.
inline CascadeExponents build_cascade(const RegularityIndices& idx, double alpha, double sigma_bar) {
  const int J = idx.J();
  const double bound = CascadeExponents::admissibility_bound(J, alpha);
  if (!(sigma_bar > 0.0) || !(sigma_bar < bound)) {
    std::ostringstream os;
    os.precision(17);
    os << "sigma_bar = " << sigma_bar << " violates 0 < sigma_bar < (4J+2alpha+1)^{-J} = " << bound;
    throw Error(os.str());
  }
  return detail::make_cascade(J, alpha, sigma_bar);
}

/// Enlarged cascade for plotting growth envelopes only; sigma_J is set to `top`.
inline CascadeExponents build_display_cascade(const RegularityIndices& idx, double alpha,
                                              double top = 0.9) {
  const int J = idx.J();
  const double ratio = 4.0 * J + 2.0 * alpha + 2.0;
  auto c = detail::make_cascade(J, alpha, top / std::pow(ratio, static_cast<double>(J)));
  c.display_only = true;
  return c;
}

enum class NormFamily { Fam1, Fam2, Fam3 };

/// Settings shared by all monitors.
struct MonitorSettings {
  int order_cap = 4;
  DerivativeMethod method = DerivativeMethod::Spectral;
  Window window{};
};

struct NormValue {
  double value = 0.0;
  /// Highest derivative order actually included when the cap cut the family short, else -1.
  int truncated_at = -1;
  bool truncated() const { return truncated_at >= 0; }
};

/// D^beta v for every |beta| <= min(max_order, cap), computed once and reused.
class DerivativeTable {
 public:
  DerivativeTable(const Field& v, int max_order, const MonitorSettings& s)
      : available_(std::min(max_order, s.order_cap)) {
    for (int ell = 0; ell <= available_; ++ell) {
      std::vector<Field> level;
      for (const auto& beta : multi_indices(v.grid.dimension, ell))
        level.push_back(spectral_derivative(v, beta, s.order_cap, s.method));
      table_.push_back(std::move(level));
    }
  }
  int available_order() const { return available_; }
  const std::vector<Field>& order(int ell) const { return table_.at(static_cast<std::size_t>(ell)); }

 private:
  int available_;
  std::vector<std::vector<Field>> table_;
};

namespace detail {

inline double weighted_sup(const Field& f, const ScalarField& w, const Window& win) {
  double m = 0.0;
  for_each_point(f.grid, [&](std::size_t p, const Point& x) {
    if (win.contains(f.grid, x)) m = std::max(m, w[p] * std::abs(f[p]));
  });
  return m;
}

inline double weighted_l2(const Field& f, const ScalarField& w, const Window& win) {
  double s = 0.0;
  for_each_point(f.grid, [&](std::size_t p, const Point& x) {
    if (win.contains(f.grid, x)) s += std::norm(w[p] * f[p]);
  });
  return std::sqrt(s * f.grid.cell_volume());
}

// sup over |beta| = ell of the weighted sup / L2 norm.
inline double order_sup(const DerivativeTable& t, int ell, const ScalarField& w, const Window& win,
                        bool l2) {
  double m = 0.0;
  for (const auto& d : t.order(ell))
    m = std::max(m, l2 ? weighted_l2(d, w, win) : weighted_sup(d, w, win));
  return m;
}

}  // namespace detail

/// The three weighted norm families indexed by ell, from a precomputed derivative table.
inline NormValue weighted_norm_family(const DerivativeTable& table, const GridSpec& grid,
                                      const RegularityIndices& idx, NormFamily kind, int ell,
                                      const MonitorSettings& s = {}) {
  const int two_m = 2 * idx.m;
  NormValue out;
  int lo = 0;
  double weight_power = idx.n;
  bool l2 = false;
  switch (kind) {
    case NormFamily::Fam1:
      if (ell < 0 || ell > two_m) throw Error("FAM1 index must satisfy 0 <= ell <= 2m");
      lo = 0;
      break;
    case NormFamily::Fam2:
      if (ell < 0 || ell > two_m + 2 + idx.k) throw Error("FAM2 index must satisfy ell <= 2m+2+k");
      if (ell <= two_m) return out;
      lo = two_m + 1;
      l2 = true;
      break;
    case NormFamily::Fam3:
      if (ell < 0 || ell > idx.J()) throw Error("FAM3 index must satisfy ell <= J");
      if (ell <= two_m + 2 + idx.k) return out;
      lo = two_m + 3 + idx.k;
      weight_power = idx.J() - ell;
      l2 = true;
      break;
  }
  const auto w = weight_field(grid, weight_power);
  const int hi = std::min(ell, table.available_order());
  for (int o = lo; o <= hi; ++o)
    out.value = std::max(out.value, detail::order_sup(table, o, w, s.window, l2));
  if (ell > table.available_order()) out.truncated_at = table.available_order();
  return out;
}

inline NormValue weighted_norm_family(const Field& field, const RegularityIndices& idx,
                                      NormFamily kind, int ell, const MonitorSettings& s = {}) {
  DerivativeTable table(field, ell, s);
  return weighted_norm_family(table, field.grid, idx, kind, ell, s);
}

/// min over the grid (or window) of <x>^n |v(x)|, the discrete proxy for the infimum over R^N.
inline double inf_weighted(const Field& field, double n, const Window& window = {}) {
  require_finite(field, "inf_weighted input");
  double m = std::numeric_limits<double>::infinity();
  for_each_point(field.grid, [&](std::size_t p, const Point& x) {
    if (!window.contains(field.grid, x)) return;
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    m = std::min(m, std::pow(1.0 + r2, 0.5 * n) * std::abs(field[p]));
  });
  return std::isinf(m) ? 0.0 : m;
}

/// Truncated analogue of the solution-space norm: weighted sup norms up to order 2m
/// plus the weighted L2 sums above it, restricted to orders <= cap.
inline NormValue space_norm_proxy(const Field& field, const RegularityIndices& idx,
                                  const MonitorSettings& s = {}) {
  DerivativeTable table(field, idx.J(), s);
  NormValue out;
  const auto wn = weight_field(field.grid, idx.n);
  for (int ell = 0; ell <= 2 * idx.m; ++ell) {
    if (ell > table.available_order()) {
      out.truncated_at = table.available_order();
      break;
    }
    out.value += detail::order_sup(table, ell, wn, s.window, false);
  }
  for (int p = 0; p <= idx.k + 1; ++p) {
    for (int q = 0; q <= idx.n; ++q) {
      const int ord = p + q + 2 * idx.m + 1;
      if (ord > table.available_order()) {
        out.truncated_at = table.available_order();
        continue;
      }
      out.value += detail::order_sup(table, ord, weight_field(field.grid, idx.n - q), s.window, true);
    }
  }
  return out;
}

/// One row of the monitor table (one snapshot).
struct NormRow {
  double tau = 0.0;
  std::vector<double> fam1;  ///< ||v||_{1,ell}, ell = 0..2m
  std::vector<double> fam2;  ///< ||v||_{2,ell}, ell = 0..2m+2+k
  std::vector<double> fam3;  ///< ||v||_{3,ell}, ell = 0..J
  double inf_weighted = 0.0;
  double phi1 = 0.0, phi2 = 0.0, phi3 = 0.0, phi4 = 0.0;
  double phi = 0.0, psi = 0.0;
};

struct NormReport {
  std::vector<NormRow> rows;
  double K = 0.0;
  bool psi_within_4K = true;
  int first_violation = -1;  ///< row index where Psi_T first exceeded 4K
  int truncated_at = -1;
  bool inf_vanished = false;
  std::vector<std::string> flags;

  double final_psi() const { return rows.empty() ? 0.0 : rows.back().psi; }
};

/// Cascade-weighted running suprema Phi_{1..4,T}, Phi_T, Psi_T over the snapshots of a
/// v-frame trajectory, and the check Psi_T <= 4K at every snapshot.
inline NormReport functionals_phi_psi(const Trajectory& traj, const CascadeExponents& cascade,
                                      const RegularityIndices& idx, double K,
                                      const MonitorSettings& s = {},
                                      double stop_at_distance = 0.0) {
  if (traj.frame() != Frame::V) throw Error("functionals require a v-frame trajectory");
  if (cascade.J != idx.J()) throw Error("cascade and indices disagree on J");
  const double b = traj.params.b;
  const int two_m = 2 * idx.m, top2 = two_m + 2 + idx.k, J = idx.J();
  NormReport rep;
  rep.K = K;
  double run1 = 0.0, run2 = 0.0, run3 = 0.0, run4 = 0.0;
  for (const auto& v : traj.snapshots) {
    const double gap = 1.0 - b * v.time;
    if (stop_at_distance > 0.0 && gap < stop_at_distance * (1.0 - 1e-9)) break;
    DerivativeTable table(v, J, s);
    NormRow row;
    row.tau = v.time;
    for (int j = 0; j <= two_m; ++j) {
      auto nv = weighted_norm_family(table, v.grid, idx, NormFamily::Fam1, j, s);
      if (nv.truncated()) rep.truncated_at = nv.truncated_at;
      row.fam1.push_back(nv.value);
      run1 = std::max(run1, std::pow(gap, cascade[j]) * nv.value);
    }
    for (int j = 0; j <= top2; ++j) {
      auto nv = weighted_norm_family(table, v.grid, idx, NormFamily::Fam2, j, s);
      if (nv.truncated()) rep.truncated_at = nv.truncated_at;
      row.fam2.push_back(nv.value);
      run2 = std::max(run2, std::pow(gap, cascade[j]) * nv.value);
    }
    for (int j = 0; j <= J; ++j) {
      auto nv = weighted_norm_family(table, v.grid, idx, NormFamily::Fam3, j, s);
      if (nv.truncated()) rep.truncated_at = nv.truncated_at;
      row.fam3.push_back(nv.value);
      run3 = std::max(run3, std::pow(gap, cascade[j]) * nv.value);
    }
    row.inf_weighted = inf_weighted(v, idx.n, s.window);
    if (row.inf_weighted > 0.0) {
      run4 = std::max(run4, std::pow(gap, cascade[1]) / row.inf_weighted);
    } else {
      run4 = std::numeric_limits<double>::infinity();
      rep.inf_vanished = true;
    }
    row.phi1 = run1;
    row.phi2 = run2;
    row.phi3 = run3;
    row.phi4 = run4;
    row.phi = std::max({run1, run2, run3});
    row.psi = std::max(row.phi, run4);
    if (!(row.psi <= 4.0 * K) && rep.psi_within_4K) {
      rep.psi_within_4K = false;
      rep.first_violation = static_cast<int>(rep.rows.size());
    }
    rep.rows.push_back(std::move(row));
  }
  if (rep.truncated_at >= 0)
    rep.flags.push_back("truncated at order " + std::to_string(rep.truncated_at));
  if (rep.inf_vanished) rep.flags.push_back("inf <x>^n|v| vanished: Phi_4 reported as +inf");
  if (!rep.psi_within_4K) rep.flags.push_back("Psi_T exceeded 4K");
  return rep;
}

}  // namespace nlsmod
