#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "nlsmod/grid.hpp"

namespace nlsmod::fft {

// FFTW's planner is not reentrant, execution with the new-array interface is.
// Plans are made with FFTW_ESTIMATE so the chosen algorithm (and hence every
// rounding) is identical from run to run.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int rank, const int* dims, int sign) {
    Key key{rank, dims[0], rank > 1 ? dims[1] : 0, rank > 2 ? dims[2] : 0, sign};
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second.get();
    std::size_t n = 1;
    for (int d = 0; d < rank; ++d) n *= static_cast<std::size_t>(dims[d]);
    std::vector<Complex> scratch(n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan p = fftw_plan_dft(rank, dims, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw Error("FFTW failed to create a plan");
    auto owned = std::shared_ptr<fftw_plan_s>(p, [](fftw_plan q) { fftw_destroy_plan(q); });
    plans_.emplace(key, owned);
    return p;
  }

 private:
  using Key = std::tuple<int, int, int, int, int>;
  std::mutex mutex_;
  std::map<Key, std::shared_ptr<fftw_plan_s>> plans_;
};

inline void execute(std::span<Complex> data, int rank, const int* dims, int sign) {
  fftw_plan p = PlanCache::instance().get(rank, dims, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(p, buf, buf);
}

/// Unnormalized forward transform over all axes of the grid, in place.
inline void forward(const GridSpec& g, std::span<Complex> data) {
  int dims[3] = {g.points, g.points, g.points};
  execute(data, g.dimension, dims, FFTW_FORWARD);
}

/// Inverse transform over all axes, normalized so backward(forward(x)) == x.
inline void backward(const GridSpec& g, std::span<Complex> data) {
  int dims[3] = {g.points, g.points, g.points};
  execute(data, g.dimension, dims, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(data.size());
  for (auto& z : data) z *= scale;
}

/// Unnormalized 1-D transform of a contiguous line.
inline void forward_1d(std::span<Complex> line) {
  int n = static_cast<int>(line.size());
  execute(line, 1, &n, FFTW_FORWARD);
}

/// |k|^2 at every Fourier-space index of the grid.
inline std::vector<double> wavenumber_squared(const GridSpec& g) {
  const auto k = g.wavenumbers();
  std::vector<double> k2(g.size());
  for (std::size_t p = 0; p < k2.size(); ++p) {
    auto idx = g.unflatten(p);
    double s = 0.0;
    for (int d = 0; d < g.dimension; ++d) s += k[idx[d]] * k[idx[d]];
    k2[p] = s;
  }
  return k2;
}

}  // namespace nlsmod::fft
