#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ghost/errors.hpp"
#include "ghost/grid.hpp"
#include "ghost/mask.hpp"
#include "ghost/rng.hpp"
#include "ghost/speckle.hpp"

namespace ghost {

/// One bucket sample per frame, in intensity * area units.
struct BucketSeries {
  std::vector<double> s;

  int count() const { return static_cast<int>(s.size()); }

  void append(double value) {
    if (!(value >= 0.0)) fail(ErrorCode::range_error, "bucket values must be >= 0");
    s.push_back(value);
  }
};

/// Bucket detector: integrates the intensity passed by the object,
/// S = sum I * |T|^2 * pitch^2. The position distribution past the mask is
/// irrelevant because the bucket captures all transmitted light, so no
/// propagation enters here.
inline double bucket_signal(const RealGrid& intensity, const ObjectMask& mask, double pitch) {
  require_same_dims(intensity, mask.t, "bucket_signal");
  if (!(pitch > 0.0)) fail(ErrorCode::non_positive_parameter, "pitch must be > 0");
  double sum = 0.0, c = 0.0;
  for (std::size_t k = 0; k < intensity.size(); ++k) {
    const double v = intensity[k] * mask.t[k] * mask.t[k];
    const double t = sum + v;
    c += (std::abs(sum) >= std::abs(v)) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return (sum + c) * pitch * pitch;
}

inline double bucket_signal(const SpeckleFrame& frame, const ObjectMask& mask, double pitch) {
  return bucket_signal(frame.intensity, mask, pitch);
}

/// Optional sensor imperfections. The default is ideal detection: the
/// correlation claims under study concern statistics, not sensor noise.
struct DetectorModel {
  bool shot_noise = false;
  double read_noise_sigma = 0.0;
  int quant_bits = 0;  ///< 0 = off, else 8 or 16
  double exposure_gain = 1.0;
  double full_scale = 1.0;  ///< intensity value mapped to the top code
};

inline DetectorModel validate_detector(const DetectorModel& m) {
  if (!(m.exposure_gain > 0.0))
    fail(ErrorCode::non_positive_parameter, "exposure_gain must be > 0");
  if (m.read_noise_sigma < 0.0)
    fail(ErrorCode::non_positive_parameter, "read_noise_sigma must be >= 0");
  if (m.quant_bits != 0 && m.quant_bits != 8 && m.quant_bits != 16)
    fail(ErrorCode::invalid_argument, "quant_bits must be 0, 8, or 16");
  if (m.quant_bits != 0 && !(m.full_scale > 0.0))
    fail(ErrorCode::non_positive_parameter, "full_scale must be > 0 when quantizing");
  return m;
}

namespace detail {

inline double detect_one(double value, const DetectorModel& m, RngStream& rng,
                         long long& saturated) {
  double v = value * m.exposure_gain;
  if (m.shot_noise) v = static_cast<double>(rng.poisson(v));
  if (m.read_noise_sigma > 0.0) v += m.read_noise_sigma * rng.normal();
  if (m.quant_bits != 0) {
    const double levels = m.quant_bits == 8 ? 255.0 : 65535.0;
    double code = std::floor(v / m.full_scale * levels + 0.5);
    if (code < 0.0) code = 0.0;
    if (code > levels) {
      code = levels;
      ++saturated;
    }
    v = code * (m.full_scale / levels);
  }
  return v;
}

}  // namespace detail

struct DetectedScalar {
  double value = 0.0;
  long long saturated = 0;
};

struct DetectedFrame {
  RealGrid values;
  long long saturated = 0;
};

/// Applies the detector model to a scalar (bucket) sample. Draws come from
/// the caller's stream; use a per-frame counter-based stream for
/// order-independent results.
inline DetectedScalar apply_detector(double value, const DetectorModel& model, RngStream& rng) {
  validate_detector(model);
  DetectedScalar out;
  out.value = detail::detect_one(value, model, rng, out.saturated);
  return out;
}

/// Applies the detector model pixel-wise to a frame.
inline DetectedFrame apply_detector(const RealGrid& frame, const DetectorModel& model,
                                    RngStream& rng) {
  validate_detector(model);
  DetectedFrame out;
  out.values = RealGrid(frame.nx, frame.ny);
  for (std::size_t k = 0; k < frame.size(); ++k)
    out.values[k] = detail::detect_one(frame[k], model, rng, out.saturated);
  return out;
}

}  // namespace ghost
