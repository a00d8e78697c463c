#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nlsmod/grid.hpp"

namespace nlsmod {

/// One named diagnostic with its verdict.
struct FitResult {
  std::string name;
  double estimate = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares of log y against log x over the pairs with x, y > 0.
inline LineFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y,
                          std::size_t min_points = 4) {
  if (x.size() != y.size()) throw Error("loglog_fit: size mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < min_points)
    throw Error("fit refused: " + std::to_string(n) + " usable points, need " +
                std::to_string(min_points));
  const double dn = static_cast<double>(n);
  const double den = dn * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) throw Error("fit refused: degenerate abscissae");
  LineFit f;
  f.slope = (dn * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / dn;
  f.points = n;
  return f;
}

}  // namespace nlsmod
