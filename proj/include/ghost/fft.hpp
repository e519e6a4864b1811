#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <tuple>

#include <fftw3.h>

#include "ghost/errors.hpp"
#include "ghost/grid.hpp"

namespace ghost {

/// Smallest size >= n whose prime factors are all in {2, 3, 5, 7}. FFTW is
/// O(n log n) for these; padding to such a length keeps transforms fast.
inline int next_fast_len(int n) {
  if (n <= 0) fail(ErrorCode::non_positive_parameter, "next_fast_len: n must be positive");
  for (;; ++n) {
    int m = n;
    for (int f : {2, 3, 5, 7})
      while (m % f == 0) m /= f;
    if (m == 1) return n;
  }
}

namespace detail {

/// Process-wide plan cache. FFTW planning is not thread safe; execution via
/// fftw_execute_dft on distinct buffers is. Plans are created with
/// FFTW_UNALIGNED so they can run on any caller buffer.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int nx, int ny, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_tuple(nx, ny, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<std::complex<double>> a(static_cast<std::size_t>(nx) * ny);
    std::vector<std::complex<double>> b(a.size());
    // FFTW uses row-major with the last dimension contiguous; our grids are
    // row-major in x, so x is the second FFTW dimension.
    fftw_plan plan = fftw_plan_dft_2d(ny, nx, reinterpret_cast<fftw_complex*>(a.data()),
                                      reinterpret_cast<fftw_complex*>(b.data()), sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) fail(ErrorCode::invalid_argument, "fft: planner failed");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

inline void execute(const ComplexGrid& in, ComplexGrid& out, int sign) {
  if (in.nx <= 0 || in.ny <= 0)
    fail(ErrorCode::non_positive_parameter, "fft: empty grid");
  if (!in.same_dims(out)) out = ComplexGrid(in.nx, in.ny);
  fftw_plan plan = PlanCache::instance().get(in.nx, in.ny, sign);
  fftw_execute_dft(plan,
                   reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data.data())),
                   reinterpret_cast<fftw_complex*>(out.data.data()));
}

}  // namespace detail

/// Unnormalized forward DFT.
inline void fft2(const ComplexGrid& in, ComplexGrid& out) {
  detail::execute(in, out, FFTW_FORWARD);
}

/// Inverse DFT scaled by 1/(nx*ny) so ifft2(fft2(x)) == x.
inline void ifft2(const ComplexGrid& in, ComplexGrid& out) {
  detail::execute(in, out, FFTW_BACKWARD);
  const double scale = 1.0 / (static_cast<double>(in.nx) * in.ny);
  for (auto& v : out.data) v *= scale;
}

/// Inverse DFT without the 1/(nx*ny) factor, for callers that fold the
/// normalization into their own scaling.
inline void ifft2_unscaled(const ComplexGrid& in, ComplexGrid& out) {
  detail::execute(in, out, FFTW_BACKWARD);
}

inline ComplexGrid fft2(const ComplexGrid& in) {
  ComplexGrid out(in.nx, in.ny);
  fft2(in, out);
  return out;
}

inline ComplexGrid ifft2(const ComplexGrid& in) {
  ComplexGrid out(in.nx, in.ny);
  ifft2(in, out);
  return out;
}

/// Signed DFT sample frequency for bin k of n samples at the given spacing,
/// matching the usual fftfreq layout.
inline double fft_freq(int k, int n, double spacing) {
  const int signed_k = (k <= (n - 1) / 2) ? k : k - n;
  return static_cast<double>(signed_k) / (static_cast<double>(n) * spacing);
}

}  // namespace ghost
