#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ghost/config.hpp"
#include "ghost/correlate.hpp"
#include "ghost/errors.hpp"
#include "ghost/grid.hpp"
#include "ghost/mask.hpp"

namespace ghost {

struct VisibilityReport {
  double v = 0.0;
  double gamma_in = 0.0;
  double gamma_out = 0.0;
  CorrelationOrder order;
  int frames_used = 0;
};

struct ResolutionReport {
  double fwhm = 0.0;  ///< meters
  CorrelationOrder order;
};

namespace detail {

/// Marks pixels within Chebyshev distance `radius` of any support pixel.
inline Grid2D<unsigned char> dilate_support(const ObjectMask& mask, int radius) {
  const int nx = mask.t.nx, ny = mask.t.ny;
  Grid2D<unsigned char> out(nx, ny, 0);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      if (!in_support(mask, x, y)) continue;
      const int y0 = std::max(0, y - radius), y1 = std::min(ny - 1, y + radius);
      const int x0 = std::max(0, x - radius), x1 = std::min(nx - 1, x + radius);
      for (int yy = y0; yy <= y1; ++yy)
        for (int xx = x0; xx <= x1; ++xx) out.at(xx, yy) = 1;
    }
  return out;
}

}  // namespace detail

/// In/out contrast of the reconstruction: gamma_in is the mean over the mask
/// support (intensity transmission > 1/2), gamma_out the mean over pixels
/// farther than one coherence length from the support (the guard band keeps
/// the correlation skirt out of the background estimate),
/// v = (in - out)/(in + out).
inline VisibilityReport visibility(const GhostImage& img, const ObjectMask& mask,
                                   const OpticalConfig& cfg) {
  require_same_dims(img.gamma, mask.t, "visibility");
  const int guard = static_cast<int>(std::ceil(coherence_length(cfg) / cfg.pitch));
  const Grid2D<unsigned char> excluded = detail::dilate_support(mask, guard);

  CompensatedSum in_sum, out_sum;
  long long in_count = 0, out_count = 0;
  for (int y = 0; y < img.gamma.ny; ++y)
    for (int x = 0; x < img.gamma.nx; ++x) {
      if (in_support(mask, x, y)) {
        in_sum.add(img.gamma.at(x, y));
        ++in_count;
      } else if (!excluded.at(x, y)) {
        out_sum.add(img.gamma.at(x, y));
        ++out_count;
      }
    }
  if (in_count == 0)
    fail(ErrorCode::empty_region, "visibility: mask support is empty");
  if (out_count == 0)
    fail(ErrorCode::empty_region,
         "visibility: no background pixels outside the one-lc guard band");

  VisibilityReport report;
  report.gamma_in = in_sum.value() / static_cast<double>(in_count);
  report.gamma_out = out_sum.value() / static_cast<double>(out_count);
  report.v = (report.gamma_in - report.gamma_out) / (report.gamma_in + report.gamma_out);
  report.order = img.order;
  report.frames_used = img.frames_used;
  return report;
}

/// Number of coherence areas inside the object support.
inline double m_obj(const ObjectMask& mask, const OpticalConfig& cfg) {
  return static_cast<double>(support_count(mask)) * cfg.pitch * cfg.pitch /
         coherence_area(cfg);
}

/// Pearson correlation between the reconstruction and the intensity
/// transmission |T|^2 over the analysis region: the support bounding box
/// dilated by a quarter of its larger span (at least 4 pixels), clamped to
/// the grid. Pixels far from the object share only the object-versus-empty
/// layout with the mask, and on a mostly empty frame that alone props the
/// whole-grid correlation up near 0.5 no matter how degraded the image is,
/// so they are excluded. Affine-invariant, so raw and max-normalized gamma
/// score identically.
inline double fidelity(const GhostImage& img, const ObjectMask& mask) {
  require_same_dims(img.gamma, mask.t, "fidelity");
  int x0 = mask.t.nx, x1 = -1, y0 = mask.t.ny, y1 = -1;
  for (int y = 0; y < mask.t.ny; ++y)
    for (int x = 0; x < mask.t.nx; ++x) {
      if (!in_support(mask, x, y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (x1 < 0) fail(ErrorCode::empty_region, "fidelity: mask support is empty");
  const int margin = std::max(4, std::max(x1 - x0, y1 - y0) / 4);
  x0 = std::max(0, x0 - margin);
  y0 = std::max(0, y0 - margin);
  x1 = std::min(mask.t.nx - 1, x1 + margin);
  y1 = std::min(mask.t.ny - 1, y1 + margin);
  std::vector<double> img_region, t2_region;
  img_region.reserve(static_cast<std::size_t>(x1 - x0 + 1) * (y1 - y0 + 1));
  t2_region.reserve(img_region.capacity());
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      img_region.push_back(img.gamma.at(x, y));
      const double t = mask.t.at(x, y);
      t2_region.push_back(t * t);
    }
  return pearson(img_region, t2_region);
}

/// Across-block standard deviation of the estimator: frames are split into
/// block_count contiguous blocks, gamma is computed per block, and the
/// per-pixel across-block sample SD is averaged over pixels. Larger values
/// mean the estimator needs more frames to converge.
inline double estimator_fluctuation(const BucketSeries& buckets, const FrameEnsemble& ref,
                                    CorrelationOrder order, int block_count) {
  validate_order(order);
  if (block_count < 2)
    fail(ErrorCode::invalid_argument, "estimator_fluctuation: block_count must be >= 2");
  const int frames = ref.count();
  if (buckets.count() != frames)
    fail(ErrorCode::length_mismatch, "estimator_fluctuation: bucket/frame length mismatch");
  if (frames % block_count != 0)
    fail(ErrorCode::invalid_argument,
         "estimator_fluctuation: frames must divide evenly into blocks");
  const int block = frames / block_count;
  if (block < 2)
    fail(ErrorCode::too_few_frames, "estimator_fluctuation: blocks need >= 2 frames each");

  const int nx = ref.frames.front().intensity.nx;
  const int ny = ref.frames.front().intensity.ny;
  const std::size_t px = static_cast<std::size_t>(nx) * ny;

  std::vector<RealGrid> block_gamma;
  block_gamma.reserve(static_cast<std::size_t>(block_count));
  for (int b = 0; b < block_count; ++b) {
    CorrAccumulator acc(order, nx, ny);
    const int begin = b * block, end = begin + block;
    for (int t = begin; t < end; ++t)
      acc.add(buckets.s[static_cast<std::size_t>(t)],
              ref.frames[static_cast<std::size_t>(t)].intensity);
    acc.freeze_means();
    for (int t = begin; t < end; ++t)
      acc.add(buckets.s[static_cast<std::size_t>(t)],
              ref.frames[static_cast<std::size_t>(t)].intensity);
    block_gamma.push_back(acc.finalize().gamma);
  }

  CompensatedSum sd_sum;
  for (std::size_t k = 0; k < px; ++k) {
    double mean = 0.0;
    for (const RealGrid& g : block_gamma) mean += g[k];
    mean /= block_count;
    double var = 0.0;
    for (const RealGrid& g : block_gamma) {
      const double d = g[k] - mean;
      var += d * d;
    }
    sd_sum.add(std::sqrt(var / (block_count - 1)));
  }
  return sd_sum.value() / static_cast<double>(px);
}

namespace detail {

inline double half_crossing(const RealGrid& gamma, int px_, int py_, int dx, int dy,
                            double half_level) {
  // Distance (pixels) from the peak to the half level along one direction,
  // by linear interpolation between the straddling samples.
  double prev = gamma.at(px_, py_);
  for (int step = 1;; ++step) {
    const int x = px_ + step * dx, y = py_ + step * dy;
    if (x < 0 || x >= gamma.nx || y < 0 || y >= gamma.ny)
      fail(ErrorCode::peak_not_found, "fwhm_from_image: half level not reached inside the grid");
    const double cur = gamma.at(x, y);
    if (cur <= half_level) {
      const double t = (prev - half_level) / (prev - cur);
      return static_cast<double>(step - 1) + t;
    }
    prev = cur;
  }
}

}  // namespace detail

/// Full width at half maximum of a peaked correlation map: fits the
/// background plateau from pixels farther than 3 lc from the peak and
/// interpolates the half-maximum crossings linearly.
inline ResolutionReport fwhm_from_image(const RealGrid& gamma, const OpticalConfig& cfg,
                                        CorrelationOrder order) {
  validate_order(order);
  int px = 0, py = 0;
  double peak = gamma.at(0, 0);
  for (int y = 0; y < gamma.ny; ++y)
    for (int x = 0; x < gamma.nx; ++x)
      if (gamma.at(x, y) > peak) {
        peak = gamma.at(x, y);
        px = x;
        py = y;
      }

  const int far = static_cast<int>(std::ceil(3.0 * coherence_length(cfg) / cfg.pitch));
  CompensatedSum plateau_sum;
  long long plateau_count = 0;
  for (int y = 0; y < gamma.ny; ++y)
    for (int x = 0; x < gamma.nx; ++x)
      if (std::max(std::abs(x - px), std::abs(y - py)) > far) {
        plateau_sum.add(gamma.at(x, y));
        ++plateau_count;
      }
  if (plateau_count < 2)
    fail(ErrorCode::empty_region, "fwhm_from_image: no plateau pixels beyond 3 lc");
  const double plateau = plateau_sum.value() / static_cast<double>(plateau_count);
  double var = 0.0;
  for (int y = 0; y < gamma.ny; ++y)
    for (int x = 0; x < gamma.nx; ++x)
      if (std::max(std::abs(x - px), std::abs(y - py)) > far) {
        const double d = gamma.at(x, y) - plateau;
        var += d * d;
      }
  // The maximum of ~10^4 noise pixels sits near 4 sigma, so a real peak has
  // to clear 5 before a width is reported.
  const double sigma = std::sqrt(var / static_cast<double>(plateau_count - 1));
  if (peak - plateau < 5.0 * sigma)
    fail(ErrorCode::peak_not_found, "fwhm_from_image: peak is below 5 sigma over the plateau");

  const double half_level = plateau + 0.5 * (peak - plateau);
  double width = detail::half_crossing(gamma, px, py, 1, 0, half_level) +
                 detail::half_crossing(gamma, px, py, -1, 0, half_level);
  int axes = 1;
  if (gamma.ny > 1) {
    width += detail::half_crossing(gamma, px, py, 0, 1, half_level) +
             detail::half_crossing(gamma, px, py, 0, -1, half_level);
    axes = 2;
  }
  ResolutionReport report;
  report.fwhm = width / axes * cfg.pitch;
  report.order = order;
  return report;
}

/// Point spread width of the reconstruction itself: images a single-pixel
/// pinhole at the given order and measures the peak width.
inline ResolutionReport psf_fwhm(const OpticalConfig& cfg, CorrelationOrder order,
                                 int frames = 20000, StreamOptions opt = {}) {
  const ObjectMask pinhole = make_pinhole(cfg);
  const std::vector<GhostImage> images =
      gamma_streamed(cfg, {&pinhole}, {order}, frames, opt);
  return fwhm_from_image(images.front().gamma, cfg, order);
}

}  // namespace ghost
