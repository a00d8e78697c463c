#pragma once

#include <cmath>
#include <complex>
#include <sstream>

#include "nlsmod/grid.hpp"

namespace nlsmod {

/// Physical configuration of i u_t + Delta u = lambda |u|^alpha u with alpha = 2/N,
/// and the quadratic-phase parameter b of the initial datum.
struct PhysParams {
  int dimension = 1;
  double alpha = 2.0;
  Complex lambda{0.0, -1.0};
  double b = 20.0;

  static PhysParams make(int dimension, Complex lambda, double b) {
    PhysParams p;
    p.dimension = dimension;
    p.alpha = 2.0 / dimension;
    p.lambda = lambda;
    p.b = b;
    p.validate();
    return p;
  }

  void validate() const {
    if (dimension < 1 || dimension > 3) throw Error("dimension must be 1, 2 or 3");
    if (alpha * dimension != 2.0) throw Error("alpha must equal 2/N (critical power)");
    if (lambda.imag() > 0.0) {
      std::ostringstream os;
      os << "Im lambda must be <= 0 (got " << lambda.imag() << ")";
      throw Error(os.str());
    }
    if (!(b > 0.0) || !std::isfinite(b)) throw Error("b must be positive");
  }

  bool dissipative() const { return lambda.imag() < 0.0; }

  /// The singular time of the v-frame.
  double blowup_time() const { return 1.0 / b; }
};

}  // namespace nlsmod
