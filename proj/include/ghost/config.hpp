#pragma once

#include <cstdint>
#include <string>

#include "ghost/errors.hpp"

namespace ghost {

/// Geometry and sampling parameters for a two-arm lensless setup. Lengths in
/// meters, intensity in arbitrary units. Immutable once validated; safe to
/// share across threads.
struct OpticalConfig {
  double wavelength = 532e-9;
  double source_diameter = 3e-3;
  double z1 = 240e-3;  ///< source to object plane
  double z2 = 240e-3;  ///< source to reference detector plane
  double z3 = 0.0;     ///< object to observation plane (direct imaging only)
  double pitch = 10e-6;
  int nx = 256;
  int ny = 256;
  double mean_intensity = 1.0;
  std::uint64_t seed = 1;
};

/// Transverse coherence length of the speckle on the object plane.
inline double coherence_length(const OpticalConfig& cfg) {
  return cfg.wavelength * cfg.z1 / cfg.source_diameter;
}

/// Coherence area (lambda*z1/D)^2.
inline double coherence_area(const OpticalConfig& cfg) {
  const double lc = coherence_length(cfg);
  return lc * lc;
}

/// Checks positivity of all parameters and the sampling guard
/// pitch <= lc/3 (at least three pixels per coherence length). Returns the
/// config unchanged when valid; throws otherwise.
inline OpticalConfig validate_config(const OpticalConfig& cfg) {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0))
      fail(ErrorCode::non_positive_parameter, std::string(name) + " must be > 0");
  };
  positive(cfg.wavelength, "wavelength");
  positive(cfg.source_diameter, "source_diameter");
  positive(cfg.z1, "z1");
  positive(cfg.z2, "z2");
  positive(cfg.pitch, "pitch");
  positive(cfg.mean_intensity, "mean_intensity");
  if (cfg.z3 < 0.0) fail(ErrorCode::non_positive_parameter, "z3 must be >= 0");
  if (cfg.nx < 1 || cfg.ny < 1)
    fail(ErrorCode::non_positive_parameter, "grid dimensions must be >= 1");
  const double lc = coherence_length(cfg);
  if (cfg.pitch > lc / 3.0)
    fail(ErrorCode::undersampled_grid,
         "pitch " + std::to_string(cfg.pitch) + " m exceeds coherence length / 3 = " +
             std::to_string(lc / 3.0) + " m");
  return cfg;
}

/// Correlation order (N, n): the bucket signal enters at power n and the
/// reference at power N - n.
struct CorrelationOrder {
  int N = 2;
  int n = 1;

  bool operator==(const CorrelationOrder& o) const { return N == o.N && n == o.n; }
  bool operator!=(const CorrelationOrder& o) const { return !(*this == o); }
};

inline CorrelationOrder validate_order(const CorrelationOrder& order) {
  if (order.N < 2)
    fail(ErrorCode::invalid_argument, "correlation order N must be >= 2");
  if (order.n < 1 || order.n > order.N - 1)
    fail(ErrorCode::invalid_argument, "correlation split n must satisfy 1 <= n <= N-1");
  return order;
}

inline std::string to_string(const CorrelationOrder& order) {
  return "N" + std::to_string(order.N) + "n" + std::to_string(order.n);
}

}  // namespace ghost
