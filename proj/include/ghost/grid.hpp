#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "ghost/errors.hpp"

namespace ghost {

/// Dense row-major 2D grid. x is the fast (column) index, y the row index.
/// A 1D scenario is a grid with ny == 1.
template <typename T>
struct Grid2D {
  int nx = 0;
  int ny = 0;
  std::vector<T> data;

  Grid2D() = default;
  Grid2D(int nx_, int ny_, T fill = T{}) : nx(nx_), ny(ny_), data(static_cast<std::size_t>(nx_) * ny_, fill) {}

  std::size_t size() const { return data.size(); }
  bool same_dims(const Grid2D& o) const { return nx == o.nx && ny == o.ny; }

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * nx + x]; }
  const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * nx + x]; }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
};

using RealGrid = Grid2D<double>;
using ComplexGrid = Grid2D<std::complex<double>>;

inline void require_same_dims(const RealGrid& a, const RealGrid& b, const char* what) {
  if (!a.same_dims(b))
    fail(ErrorCode::dimension_mismatch, std::string(what) + ": grids differ in shape");
}

/// x^e for integer e >= 0 by squaring. The correlation hot loops raise O(1)
/// ratios to small integer powers; std::pow is an order of magnitude slower.
inline double pow_int(double x, int e) {
  double r = 1.0;
  while (e > 0) {
    if (e & 1) r *= x;
    x *= x;
    e >>= 1;
  }
  return r;
}

/// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double v) {
    const double t = sum + v;
    comp += (std::abs(sum) >= std::abs(v)) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }

  void merge(const CompensatedSum& o) {
    add(o.sum);
    add(o.comp);
  }

  double value() const { return sum + comp; }
};

inline double grid_sum(const RealGrid& g) {
  double s = 0.0, c = 0.0;
  for (double v : g.data) {  // Neumaier compensation
    double t = s + v;
    if (std::abs(s) >= std::abs(v))
      c += (s - t) + v;
    else
      c += (v - t) + s;
    s = t;
  }
  return s + c;
}

inline double grid_mean(const RealGrid& g) {
  return g.size() ? grid_sum(g) / static_cast<double>(g.size()) : 0.0;
}

inline double grid_min(const RealGrid& g) {
  return *std::min_element(g.data.begin(), g.data.end());
}

inline double grid_max(const RealGrid& g) {
  return *std::max_element(g.data.begin(), g.data.end());
}

inline bool grid_finite(const RealGrid& g) {
  return std::all_of(g.data.begin(), g.data.end(), [](double v) { return std::isfinite(v); });
}

/// Pearson correlation coefficient between two equally long sample vectors.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(ErrorCode::length_mismatch, "pearson: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) fail(ErrorCode::insufficient_samples, "pearson: need at least 2 samples");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0)
    fail(ErrorCode::zero_variance, "pearson: an input has zero variance");
  return sab / std::sqrt(saa * sbb);
}

/// Pearson correlation coefficient between two grids over all pixels.
inline double pearson(const RealGrid& a, const RealGrid& b) {
  require_same_dims(a, b, "pearson");
  return pearson(a.data, b.data);
}

}  // namespace ghost
