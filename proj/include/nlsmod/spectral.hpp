#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "nlsmod/fft.hpp"
#include "nlsmod/grid.hpp"

namespace nlsmod {

enum class DerivativeMethod { Spectral, FiniteDifference8 };

inline int order(const MultiIndex& beta, int dimension) {
  int s = 0;
  for (int d = 0; d < dimension; ++d) s += beta[d];
  return s;
}

/// All multi-indices of total order `ell` in `dimension` variables.
inline std::vector<MultiIndex> multi_indices(int dimension, int ell) {
  std::vector<MultiIndex> out;
  if (dimension == 1) {
    out.push_back({ell, 0, 0});
  } else if (dimension == 2) {
    for (int a = ell; a >= 0; --a) out.push_back({a, ell - a, 0});
  } else {
    for (int a = ell; a >= 0; --a)
      for (int b = ell - a; b >= 0; --b) out.push_back({a, b, ell - a - b});
  }
  return out;
}

/// e^{i dt Delta}: every Fourier mode is multiplied by e^{-i dt |k|^2}. dt may be negative.
inline Field free_propagate(const Field& field, double dt) {
  require_finite(field, "free_propagate input");
  Field out = field;
  out.time = field.time + dt;
  if (dt == 0.0) return out;
  fft::forward(out.grid, out.values);
  const auto k2 = fft::wavenumber_squared(out.grid);
  for (std::size_t p = 0; p < out.size(); ++p) out[p] *= std::polar(1.0, -dt * k2[p]);
  fft::backward(out.grid, out.values);
  return out;
}

/// L2 norm evaluated on the Fourier side (discrete Parseval).
inline double fourier_l2_norm(const Field& field) {
  std::vector<Complex> hat = field.values;
  fft::forward(field.grid, hat);
  double s = 0.0;
  for (const auto& z : hat) s += std::norm(z);
  return std::sqrt(s / static_cast<double>(hat.size()) * field.grid.cell_volume());
}

/// Zeroes Fourier modes with any |k_d| above two thirds of the Nyquist wavenumber.
inline void dealias_two_thirds(Field& field) {
  const auto& g = field.grid;
  fft::forward(g, field.values);
  const int cut = g.points / 3;
  for (std::size_t p = 0; p < field.size(); ++p) {
    auto idx = g.unflatten(p);
    for (int d = 0; d < g.dimension; ++d) {
      const int j = idx[d] < g.points / 2 ? idx[d] : g.points - idx[d];
      if (j > cut) {
        field[p] = 0.0;
        break;
      }
    }
  }
  fft::backward(g, field.values);
}

class DerivativeOrderError : public Error {
 public:
  DerivativeOrderError(int requested, int cap)
      : Error("derivative order " + std::to_string(requested) + " exceeds the configured cap " +
              std::to_string(cap)),
        requested_order(requested),
        order_cap(cap) {}
  int requested_order;
  int order_cap;
};

namespace detail {

// Applies prod_d (i k_d)^{beta_d} in Fourier space. Odd powers kill the Nyquist mode.
inline void apply_multiplier(const GridSpec& g, std::vector<Complex>& hat, const MultiIndex& beta) {
  const auto k = g.wavenumbers();
  for (std::size_t p = 0; p < hat.size(); ++p) {
    auto idx = g.unflatten(p);
    Complex m = 1.0;
    for (int d = 0; d < g.dimension; ++d) {
      if (beta[d] == 0) continue;
      if (g.is_nyquist(idx[d]) && beta[d] % 2 == 1) {
        m = 0.0;
        break;
      }
      m *= std::pow(Complex(0.0, k[idx[d]]), beta[d]);
    }
    hat[p] *= m;
  }
}

// 8th-order centered first derivative along one axis, periodic.
inline std::vector<Complex> fd8_axis(const GridSpec& g, const std::vector<Complex>& in, int axis) {
  static constexpr std::array<double, 4> c = {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
  const int m = g.points;
  std::size_t stride = 1;
  for (int d = g.dimension - 1; d > axis; --d) stride *= static_cast<std::size_t>(m);
  const double inv_h = 1.0 / g.spacing();
  std::vector<Complex> out(in.size());
  for (std::size_t p = 0; p < in.size(); ++p) {
    const int i = static_cast<int>((p / stride) % m);
    const std::size_t base = p - static_cast<std::size_t>(i) * stride;
    Complex acc = 0.0;
    for (int s = 1; s <= 4; ++s) {
      const int ip = (i + s) % m;
      const int im = (i - s + m) % m;
      acc += c[s - 1] * (in[base + ip * stride] - in[base + im * stride]);
    }
    out[p] = acc * inv_h;
  }
  return out;
}

}  // namespace detail

/// D^beta of the field. Spectral by default; the finite-difference path
/// applies the 8th-order stencil beta_d times along each axis.
inline Field spectral_derivative(const Field& field, const MultiIndex& beta, int order_cap = 4,
                                 DerivativeMethod method = DerivativeMethod::Spectral) {
  require_finite(field, "spectral_derivative input");
  const int total = order(beta, field.grid.dimension);
  if (total > order_cap) throw DerivativeOrderError(total, order_cap);
  Field out = field;
  if (total == 0) return out;
  if (method == DerivativeMethod::Spectral) {
    fft::forward(out.grid, out.values);
    detail::apply_multiplier(out.grid, out.values, beta);
    fft::backward(out.grid, out.values);
  } else {
    for (int d = 0; d < field.grid.dimension; ++d)
      for (int r = 0; r < beta[d]; ++r) out.values = detail::fd8_axis(out.grid, out.values, d);
  }
  return out;
}

/// Sum of the pure second derivatives.
inline Field laplacian(const Field& field) {
  require_finite(field, "laplacian input");
  Field out = field;
  fft::forward(out.grid, out.values);
  const auto k2 = fft::wavenumber_squared(out.grid);
  for (std::size_t p = 0; p < out.size(); ++p) out[p] *= -k2[p];
  fft::backward(out.grid, out.values);
  return out;
}

/// Samples of <x>^p = (1 + |x|^2)^{p/2}.
inline ScalarField weight_field(const GridSpec& grid, double p) {
  ScalarField w(grid);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::pow(1.0 + grid.radius_squared(i), 0.5 * p);
  return w;
}

/// Smooth step: 1 for s <= 0, 0 for s >= 1, C-infinity in between.
inline double smooth_step_down(double s) {
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return 0.0;
  auto bump = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  const double a = bump(1.0 - s);
  const double e = a / (a + bump(s));
  // cos^2 shaping keeps the profile symmetric about s = 1/2.
  const double c = std::cos(0.5 * std::numbers::pi * (1.0 - e));
  return c * c;
}

/// Product over axes of a cosine-shaped C-infinity taper acting on the outer
/// `fraction` of the box: 1 for |x_d| <= (1 - fraction) L, 0 at |x_d| = L.
inline ScalarField edge_taper(const GridSpec& grid, double fraction) {
  ScalarField t(grid, 1.0);
  if (fraction <= 0.0) return t;
  const double inner = (1.0 - fraction) * grid.half_width;
  const double width = fraction * grid.half_width;
  for_each_point(grid, [&](std::size_t p, const Point& x) {
    double v = 1.0;
    for (int d = 0; d < grid.dimension; ++d) v *= smooth_step_down((std::abs(x[d]) - inner) / width);
    t[p] = v;
  });
  return t;
}

struct ResampleResult {
  Field field;
  /// Relative L2 mass of the source lying outside the pre-image of the target box.
  double tail_mass_fraction = 0.0;
};

namespace detail {

// Trigonometric interpolant of one axis at arbitrary coordinates; zero outside [-L, L].
inline void interpolate_axis(const GridSpec& src, std::vector<Complex>& data, std::size_t outer,
                             std::size_t inner, const std::vector<double>& targets,
                             std::vector<Complex>& result) {
  const int m = src.points;
  const std::size_t nt = targets.size();
  const double dk = std::numbers::pi / src.half_width;
  const double L = src.half_width;
  const std::size_t lines = outer * inner;

  // Coefficients of every line, laid out line-major.
  std::vector<Complex> coef(lines * m);
  std::vector<Complex> line(m);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      for (int i = 0; i < m; ++i) line[i] = data[(o * m + i) * inner + in];
      fft::forward_1d(line);
      Complex* dst = &coef[(o * inner + in) * m];
      for (int i = 0; i < m; ++i) dst[i] = line[i] / static_cast<double>(m);
    }
  }

  result.assign(outer * nt * inner, Complex(0.0));
  std::vector<Complex> basis(m);
  for (std::size_t j = 0; j < nt; ++j) {
    const double y = targets[j];
    if (std::abs(y) > L * (1.0 + 1e-12)) continue;
    const double phase = dk * (y + L);
    const Complex step = std::polar(1.0, phase);
    Complex e = 1.0;
    basis[0] = 1.0;
    for (int i = 1; i < m / 2; ++i) {
      e *= step;
      if (i % 64 == 0) e = std::polar(1.0, phase * i);
      basis[i] = e;
      basis[m - i] = std::conj(e);
    }
    basis[m / 2] = std::cos(phase * (m / 2));
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const Complex* c = &coef[(o * inner + in) * m];
        Complex acc = 0.0;
        for (int i = 0; i < m; ++i) acc += c[i] * basis[i];
        result[(o * nt + j) * inner + in] = acc;
      }
    }
  }
}

}  // namespace detail

/// Band-limited resampling: out(x) = src(scale * x) at every point x of `target`,
/// zero where scale * x falls outside the source box.
inline ResampleResult resample_scaled(const Field& src, const GridSpec& target, double scale) {
  if (target.dimension != src.grid.dimension) throw Error("resample: dimension mismatch");
  ResampleResult res;
  res.field = Field(target, src.frame, src.time);

  // Mass that cannot be represented on the target.
  {
    const double reach = std::abs(scale) * target.half_width;
    double outside = 0.0, total = 0.0;
    for_each_point(src.grid, [&](std::size_t p, const Point& x) {
      const double a = std::norm(src[p]);
      total += a;
      for (int d = 0; d < src.grid.dimension; ++d)
        if (std::abs(x[d]) > reach * (1.0 + 1e-12)) {
          outside += a;
          break;
        }
    });
    res.tail_mass_fraction = total > 0.0 ? outside / total : 0.0;
  }

  // Grid-aligned dilation: target point j maps exactly onto source point j.
  if (target.points == src.grid.points &&
      std::abs(scale * target.half_width - src.grid.half_width) <= 1e-14 * src.grid.half_width) {
    res.field.values = src.values;
    return res;
  }

  std::vector<double> targets(target.points);
  for (int j = 0; j < target.points; ++j) targets[j] = scale * target.coordinate(j);

  std::vector<Complex> data = src.values;
  const int n = src.grid.dimension;
  std::vector<std::size_t> extent(n, static_cast<std::size_t>(src.grid.points));
  for (int axis = 0; axis < n; ++axis) {
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= extent[d];
    for (int d = axis + 1; d < n; ++d) inner *= extent[d];
    std::vector<Complex> result;
    detail::interpolate_axis(src.grid, data, outer, inner, targets, result);
    data.swap(result);
    extent[axis] = static_cast<std::size_t>(target.points);
  }
  res.field.values = std::move(data);
  return res;
}

/// Real-valued counterpart of resample_scaled.
inline ScalarField resample_scaled(const ScalarField& src, const GridSpec& target, double scale) {
  Field tmp(src.grid, Frame::V, 0.0);
  for (std::size_t i = 0; i < src.size(); ++i) tmp[i] = src[i];
  auto r = resample_scaled(tmp, target, scale);
  ScalarField out(target);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = r.field[i].real();
  return out;
}

}  // namespace nlsmod
