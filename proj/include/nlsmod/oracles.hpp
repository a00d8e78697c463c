#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <utility>

#include "nlsmod/grid.hpp"
#include "nlsmod/params.hpp"

namespace nlsmod::oracles {

/// z(t) for i z' = lambda (1 - b t)^{-1} |z|^alpha z, from the modulus law
/// |z(t)|^{-alpha} = |z0|^{-alpha} + (alpha |Im lambda| / b) |log(1 - b t)|.
inline Complex ode_closed_form(double t, Complex z0, const PhysParams& p) {
  if (t < 0.0 || !(p.b * t < 1.0)) throw Error("ode_closed_form: t outside [0, 1/b)");
  if (z0 == Complex(0.0)) throw Error("ode_closed_form: z0 must be nonzero");
  const double ell = -std::log1p(-p.b * t);
  const double r0a = std::pow(std::abs(z0), p.alpha);
  double phase;
  double modulus;
  if (p.lambda.imag() == 0.0) {
    modulus = std::abs(z0);
    phase = -p.lambda.real() / p.b * r0a * ell;
  } else {
    const double ma = 1.0 / (1.0 / r0a + p.alpha * std::abs(p.lambda.imag()) / p.b * ell);
    modulus = std::pow(ma, 1.0 / p.alpha);
    // The phase rate is -Re(lambda) (1 - b t)^{-1} |z|^alpha; integrating with the
    // modulus law gives (Re lambda / (alpha Im lambda)) log(|z0|^alpha / |z|^alpha).
    phase = p.lambda.real() / (p.alpha * p.lambda.imag()) * std::log(r0a / ma);
  }
  return std::polar(modulus, std::arg(z0) + phase);
}

/// Samples of e^{it Delta} e^{-a|x|^2} = (1 + 4iat)^{-N/2} e^{-a|x|^2 / (1 + 4iat)}.
inline Field gaussian_free_solution(double t, const GridSpec& grid, double a) {
  if (!(a > 0.0)) throw Error("gaussian_free_solution: a must be positive");
  Field out(grid, Frame::U, t);
  const Complex d(1.0, 4.0 * a * t);
  const Complex pre = std::pow(d, -0.5 * grid.dimension);
  for_each_point(grid, [&](std::size_t i, const Point& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    out[i] = pre * std::exp(-a * r2 / d);
  });
  return out;
}

/// (adaptive quadrature of int_0^t (1 - b s)^{-1-mu} ds, (1/(b mu)) [(1 - b t)^{-mu} - 1]).
inline std::pair<double, double> check_integral_identity(double mu, double b, double t) {
  if (!(mu > 0.0)) throw Error("check_integral_identity: mu must be positive");
  if (t < 0.0 || !(b * t < 1.0)) throw Error("check_integral_identity: t outside [0, 1/b)");
  const double rhs = (std::pow(1.0 - b * t, -mu) - 1.0) / (b * mu);
  if (t == 0.0) return {0.0, rhs};
  auto f = [&](double s) { return std::pow(1.0 - b * s, -1.0 - mu); };
  const double lhs =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, t, 15, 1e-13);
  return {lhs, rhs};
}

/// theta at one point by direct quadrature of
/// (Re lambda / b) int_0^{|phi0|^alpha |log(1-b tau)|} ds / (1 + f0 + s alpha |Im lambda| / b).
inline double theta_by_quadrature(double phi0_abs, double f0, double tau, const PhysParams& p) {
  const double upper = std::pow(phi0_abs, p.alpha) * -std::log1p(-p.b * tau);
  if (upper == 0.0) return 0.0;
  const double a = p.alpha * std::abs(p.lambda.imag()) / p.b;
  auto g = [&](double s) { return 1.0 / (1.0 + f0 + s * a); };
  const double I =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, upper, 15, 1e-14);
  return p.lambda.real() / p.b * I;
}

}  // namespace nlsmod::oracles
