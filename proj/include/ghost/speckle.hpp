#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "ghost/config.hpp"
#include "ghost/errors.hpp"
#include "ghost/fft.hpp"
#include "ghost/grid.hpp"
#include "ghost/rng.hpp"

namespace ghost {

/// One instantaneous speckle exposure: nonnegative intensities on the
/// config grid.
struct SpeckleFrame {
  RealGrid intensity;
  std::int64_t frame_index = 0;
  std::uint64_t seed_used = 0;
};

/// A speckle field realization before squaring, for modules that need the
/// complex amplitude (free-space propagation).
struct SpeckleField {
  ComplexGrid field;
  std::int64_t frame_index = 0;
  std::uint64_t seed_used = 0;
};

/// Ordered, dimension-consistent sequence of frames.
struct FrameEnsemble {
  std::vector<SpeckleFrame> frames;

  int count() const { return static_cast<int>(frames.size()); }

  void append(SpeckleFrame frame) {
    if (!frames.empty()) {
      if (!frames.back().intensity.same_dims(frame.intensity))
        fail(ErrorCode::dimension_mismatch, "ensemble frames differ in grid size");
      if (frame.frame_index <= frames.back().frame_index)
        fail(ErrorCode::invalid_argument, "ensemble frame_index must be strictly increasing");
    }
    frames.push_back(std::move(frame));
  }
};

/// Pseudothermal speckle generator. Draws white circular complex Gaussian
/// noise in the spatial-frequency domain, shapes it with a Gaussian transfer
/// function sized so the field correlation is exp(-2*dr^2/lc^2) with
/// lc = lambda*z1/D (intensity autocovariance 1/e full width lc), inverse
/// transforms, and crops away a 4*lc guard border that absorbs filter
/// wrap-around. Single-point intensity statistics are exactly exponential.
///
/// Frames are a pure function of (cfg.seed, frame_index); instances hold
/// scratch buffers, so use one instance per thread.
class SpeckleSynth {
 public:
  explicit SpeckleSynth(const OpticalConfig& cfg) : cfg_(validate_config(cfg)) {
    lc_ = coherence_length(cfg_);
    const int pad = static_cast<int>(std::ceil(4.0 * lc_ / cfg_.pitch));
    px_ = cfg_.nx > 1 ? next_fast_len(cfg_.nx + 2 * pad) : 1;
    py_ = cfg_.ny > 1 ? next_fast_len(cfg_.ny + 2 * pad) : 1;
    hx_ = axis_filter(px_);
    hy_ = axis_filter(py_);
    double sx = 0.0, sy = 0.0;
    for (double h : hx_) sx += h * h;
    for (double h : hy_) sy += h * h;
    amp_scale_ = std::sqrt(cfg_.mean_intensity / (sx * sy));
    spectrum_ = ComplexGrid(px_, py_);
    padded_ = ComplexGrid(px_, py_);
  }

  const OpticalConfig& config() const { return cfg_; }
  double coherence_len() const { return lc_; }
  int padded_nx() const { return px_; }
  int padded_ny() const { return py_; }
  int crop_x0() const { return (px_ - cfg_.nx) / 2; }
  int crop_y0() const { return (py_ - cfg_.ny) / 2; }

  /// Field realization on the full synthesis grid (config grid plus the
  /// stationarity padding). The reference is into scratch storage and is
  /// invalidated by the next synthesis call.
  const ComplexGrid& padded_field(std::int64_t frame_index) {
    const std::uint64_t seed = stream_seed(cfg_.seed, frame_index, RngDomain::speckle);
    RngStream rng(seed);
    for (int ky = 0; ky < py_; ++ky) {
      const double hy = hy_[static_cast<std::size_t>(ky)];
      for (int kx = 0; kx < px_; ++kx) {
        const double w = amp_scale_ * hx_[static_cast<std::size_t>(kx)] * hy;
        spectrum_.at(kx, ky) = w * rng.complex_normal();
      }
    }
    ifft2_unscaled(spectrum_, padded_);
    last_seed_ = seed;
    return padded_;
  }

  /// Complex field realization on the config grid.
  SpeckleField field(std::int64_t frame_index) {
    const ComplexGrid& full = padded_field(frame_index);

    SpeckleField out;
    out.field = ComplexGrid(cfg_.nx, cfg_.ny);
    const int ox = crop_x0();
    const int oy = crop_y0();
    for (int y = 0; y < cfg_.ny; ++y)
      for (int x = 0; x < cfg_.nx; ++x) out.field.at(x, y) = full.at(ox + x, oy + y);
    out.frame_index = frame_index;
    out.seed_used = last_seed_;
    return out;
  }

  /// Intensity realization |E|^2 on the config grid.
  SpeckleFrame frame(std::int64_t frame_index) {
    const SpeckleField f = field(frame_index);
    SpeckleFrame out;
    out.intensity = RealGrid(cfg_.nx, cfg_.ny);
    for (std::size_t k = 0; k < out.intensity.size(); ++k)
      out.intensity[k] = std::norm(f.field[k]);
    out.frame_index = frame_index;
    out.seed_used = f.seed_used;
    return out;
  }

 private:
  std::vector<double> axis_filter(int n) const {
    // Amplitude transfer H(f) = exp(-(pi^2 lc^2 / 4) f^2); |H|^2 transforms
    // to the target field-correlation envelope.
    std::vector<double> h(static_cast<std::size_t>(n));
    const double c = M_PI * M_PI * lc_ * lc_ / 4.0;
    for (int k = 0; k < n; ++k) {
      const double f = fft_freq(k, n, cfg_.pitch);
      h[static_cast<std::size_t>(k)] = std::exp(-c * f * f);
    }
    return h;
  }

  OpticalConfig cfg_;
  double lc_ = 0.0;
  int px_ = 0, py_ = 0;
  std::vector<double> hx_, hy_;
  double amp_scale_ = 0.0;
  std::uint64_t last_seed_ = 0;
  ComplexGrid spectrum_, padded_;
};

inline SpeckleFrame generate_frame(const OpticalConfig& cfg, std::int64_t frame_index) {
  SpeckleSynth synth(cfg);
  return synth.frame(frame_index);
}

/// Object-plane and reference-plane frames for one exposure. In the focused
/// lensless geometry (z1 = z2) the two planes carry the same realization.
inline std::pair<SpeckleFrame, SpeckleFrame> generate_arm_pair(const OpticalConfig& cfg,
                                                               std::int64_t frame_index) {
  if (cfg.z1 != cfg.z2)
    fail(ErrorCode::unequal_arms, "arm pair model requires z1 == z2, got z1 = " +
                                      std::to_string(cfg.z1) + ", z2 = " + std::to_string(cfg.z2));
  SpeckleFrame object_plane = generate_frame(cfg, frame_index);
  SpeckleFrame reference_plane = object_plane;
  return {std::move(object_plane), std::move(reference_plane)};
}

inline FrameEnsemble generate_ensemble(const OpticalConfig& cfg, std::int64_t first_index,
                                       int count) {
  SpeckleSynth synth(cfg);
  FrameEnsemble ensemble;
  ensemble.frames.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) ensemble.append(synth.frame(first_index + k));
  return ensemble;
}

/// Kolmogorov-Smirnov distance between the pixel-intensity empirical CDF and
/// an exponential with the sample mean. `stride` subsamples pixels on a
/// stride x stride lattice; pass the coherence length in pixels to obtain
/// approximately independent samples (the KS null assumes i.i.d. data).
inline double exponential_fit_test(const FrameEnsemble& ensemble, int stride = 1) {
  if (stride < 1) fail(ErrorCode::non_positive_parameter, "stride must be >= 1");
  std::vector<double> samples;
  for (const SpeckleFrame& f : ensemble.frames)
    for (int y = 0; y < f.intensity.ny; y += stride)
      for (int x = 0; x < f.intensity.nx; x += stride) samples.push_back(f.intensity.at(x, y));
  if (samples.size() < 10000)
    fail(ErrorCode::insufficient_samples,
         "exponential fit needs >= 10^4 samples, got " + std::to_string(samples.size()));

  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / static_cast<double>(samples.size());
  if (!(mean > 0.0)) fail(ErrorCode::zero_mean, "exponential fit: sample mean is zero");

  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = 1.0 - std::exp(-samples[i] / mean);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(cdf - lo, hi - cdf));
  }
  return d;
}

/// Measured 1/e full width (meters) of the ensemble-averaged intensity
/// autocovariance along x, via the circular FFT correlation of the
/// mean-subtracted frames. Calibration check for the synthesized lc.
inline double measure_autocov_width(const FrameEnsemble& ensemble, double pitch) {
  if (!(pitch > 0.0)) fail(ErrorCode::non_positive_parameter, "pitch must be > 0");
  if (ensemble.count() < 1)
    fail(ErrorCode::insufficient_samples, "autocovariance needs at least one frame");
  const int nx = ensemble.frames.front().intensity.nx;
  const int ny = ensemble.frames.front().intensity.ny;
  if (nx < 4) fail(ErrorCode::insufficient_samples, "autocovariance needs nx >= 4");

  RealGrid power(nx, ny, 0.0);
  ComplexGrid work(nx, ny), spec(nx, ny);
  for (const SpeckleFrame& f : ensemble.frames) {
    const double mean = grid_mean(f.intensity);
    for (std::size_t k = 0; k < work.size(); ++k) work[k] = f.intensity[k] - mean;
    fft2(work, spec);
    for (std::size_t k = 0; k < power.size(); ++k) power[k] += std::norm(spec[k]);
  }
  for (std::size_t k = 0; k < power.size(); ++k) work[k] = power[k];
  ifft2(work, spec);

  const double c0 = spec.at(0, 0).real();
  if (!(c0 > 0.0)) fail(ErrorCode::zero_variance, "autocovariance: frames are constant");
  const double target = 1.0 / M_E;
  double prev = 1.0;
  for (int dx = 1; dx <= nx / 2; ++dx) {
    const double r = spec.at(dx, 0).real() / c0;
    if (r <= target) {
      const double t = (prev - target) / (prev - r);
      return 2.0 * (static_cast<double>(dx - 1) + t) * pitch;
    }
    prev = r;
  }
  fail(ErrorCode::peak_not_found, "autocovariance does not decay to 1/e within the grid");
}

}  // namespace ghost
