#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlsmod {

using Complex = std::complex<double>;
using MultiIndex = std::array<int, 3>;
using Point = std::array<double, 3>;

/// Raised for any violated precondition or invariant; the message names the check.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Frame { U, V };

inline const char* to_string(Frame f) { return f == Frame::U ? "u" : "v"; }

inline Frame frame_from_string(const std::string& s) {
  if (s == "u" || s == "U" || s == "U_FRAME") return Frame::U;
  if (s == "v" || s == "V" || s == "V_FRAME") return Frame::V;
  throw Error("unknown frame '" + s + "'");
}

/// Uniform periodic grid on [-L, L)^N with M points per axis.
struct GridSpec {
  int dimension = 1;
  double half_width = 40.0;
  int points = 1024;

  GridSpec() = default;
  GridSpec(int n, double l, int m) : dimension(n), half_width(l), points(m) { validate(); }

  void validate() const {
    if (dimension < 1 || dimension > 3)
      throw Error("grid dimension must be 1, 2 or 3 (got " + std::to_string(dimension) + ")");
    if (!(half_width > 0.0) || !std::isfinite(half_width))
      throw Error("grid half_width must be positive");
    if (points < 2 || points % 2 != 0)
      throw Error("grid points_per_axis must be a positive even integer (got " +
                  std::to_string(points) + ")");
  }

  double spacing() const { return 2.0 * half_width / points; }

  std::size_t size() const {
    std::size_t s = 1;
    for (int d = 0; d < dimension; ++d) s *= static_cast<std::size_t>(points);
    return s;
  }

  double cell_volume() const { return std::pow(spacing(), dimension); }

  double coordinate(int i) const { return -half_width + i * spacing(); }

  /// k_j = pi j / L in FFT ordering; index M/2 is the Nyquist mode (negative branch).
  double wavenumber(int i) const {
    const int j = i < points / 2 ? i : i - points;
    return std::numbers::pi * j / half_width;
  }

  bool is_nyquist(int i) const { return i == points / 2; }

  std::vector<double> wavenumbers() const {
    std::vector<double> k(points);
    for (int i = 0; i < points; ++i) k[i] = wavenumber(i);
    return k;
  }

  std::array<int, 3> unflatten(std::size_t flat) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int d = dimension - 1; d >= 0; --d) {
      idx[d] = static_cast<int>(flat % points);
      flat /= points;
    }
    return idx;
  }

  Point point(std::size_t flat) const {
    auto idx = unflatten(flat);
    Point x{0.0, 0.0, 0.0};
    for (int d = 0; d < dimension; ++d) x[d] = coordinate(idx[d]);
    return x;
  }

  double radius_squared(std::size_t flat) const {
    auto x = point(flat);
    return x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
  }

  bool operator==(const GridSpec& o) const {
    return dimension == o.dimension && half_width == o.half_width && points == o.points;
  }
};

/// Same point count, box scaled by `factor`. Grid point j of the result is factor * (grid point j).
inline GridSpec dilated(const GridSpec& g, double factor) {
  return GridSpec(g.dimension, g.half_width * factor, g.points);
}

/// Visits every grid point with its flat index and coordinates.
template <class F>
void for_each_point(const GridSpec& g, F&& fn) {
  const std::size_t n = g.size();
  for (std::size_t p = 0; p < n; ++p) fn(p, g.point(p));
}

/// Axis-aligned sub-box |x_d| <= fraction * L on which monitors are evaluated.
struct Window {
  double fraction = 1.0;

  bool contains(const GridSpec& g, const Point& x) const {
    const double lim = fraction * g.half_width * (1.0 + 1e-12);
    for (int d = 0; d < g.dimension; ++d)
      if (std::abs(x[d]) > lim) return false;
    return true;
  }
};

/// Complex grid function tagged with its frame and time stamp.
struct Field {
  GridSpec grid;
  std::vector<Complex> values;
  Frame frame = Frame::V;
  double time = 0.0;

  Field() = default;
  Field(GridSpec g, Frame f, double t) : grid(g), values(g.size()), frame(f), time(t) {}
  Field(GridSpec g, std::vector<Complex> v, Frame f, double t)
      : grid(g), values(std::move(v)), frame(f), time(t) {
    if (values.size() != grid.size())
      throw Error("field has " + std::to_string(values.size()) + " values but grid has " +
                  std::to_string(grid.size()) + " points");
  }

  std::size_t size() const { return values.size(); }
  Complex& operator[](std::size_t i) { return values[i]; }
  const Complex& operator[](std::size_t i) const { return values[i]; }
};

/// Real-valued grid function (weights, the accumulator f, L, ...).
struct ScalarField {
  GridSpec grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(GridSpec g, double fill = 0.0) : grid(g), values(g.size(), fill) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  const double& operator[](std::size_t i) const { return values[i]; }
};

/// Throws with the first offending index if any value is NaN or Inf.
inline void require_finite(const Field& f, const char* what = "field") {
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (!std::isfinite(f.values[i].real()) || !std::isfinite(f.values[i].imag())) {
      std::ostringstream os;
      os << what << " has a non-finite value at index " << i << " (" << f.values[i] << ")";
      throw Error(os.str());
    }
  }
}

inline void require_same_grid(const Field& a, const Field& b) {
  if (!(a.grid == b.grid)) throw Error("fields live on different grids");
}

inline double l2_norm(const Field& f) {
  double s = 0.0;
  for (const auto& z : f.values) s += std::norm(z);
  return std::sqrt(s * f.grid.cell_volume());
}

inline double l2_norm(const Field& f, const Window& w) {
  double s = 0.0;
  for_each_point(f.grid, [&](std::size_t p, const Point& x) {
    if (w.contains(f.grid, x)) s += std::norm(f.values[p]);
  });
  return std::sqrt(s * f.grid.cell_volume());
}

inline double sup_norm(const Field& f) {
  double m = 0.0;
  for (const auto& z : f.values) m = std::max(m, std::abs(z));
  return m;
}

inline double l2_distance(const Field& a, const Field& b) {
  require_same_grid(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(s * a.grid.cell_volume());
}

inline double relative_l2_distance(const Field& a, const Field& ref) {
  const double n = l2_norm(ref);
  const double d = l2_distance(a, ref);
  return n > 0.0 ? d / n : d;
}

inline double sup_distance(const Field& a, const Field& b) {
  require_same_grid(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace nlsmod
