#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>

#include "ghost/config.hpp"
#include "ghost/errors.hpp"
#include "ghost/fft.hpp"
#include "ghost/grid.hpp"
#include "ghost/mask.hpp"
#include "ghost/speckle.hpp"

namespace ghost {

/// Scalar complex field sampled on a regular grid.
struct ComplexField {
  ComplexGrid grid;
  double pitch = 0.0;
  double wavelength = 0.0;

  ComplexField() : grid(1, 1) {}
  ComplexField(ComplexGrid g, double pitch_, double wavelength_)
      : grid(std::move(g)), pitch(pitch_), wavelength(wavelength_) {
    if (!(pitch > 0.0) || !(wavelength > 0.0))
      fail(ErrorCode::non_positive_parameter, "field pitch and wavelength must be > 0");
  }
};

/// Precomputed angular-spectrum transfer function for one propagation
/// distance: H = exp(i 2 pi z sqrt(1/lambda^2 - fx^2 - fy^2)), evanescent
/// components zeroed. Exact for the sampled band.
class AngularSpectrum {
 public:
  AngularSpectrum(int nx, int ny, double pitch, double wavelength, double z)
      : transfer_(nx, ny), scratch_(nx, ny) {
    if (z < 0.0) fail(ErrorCode::non_positive_parameter, "propagation distance must be >= 0");
    if (!(pitch > 0.0) || !(wavelength > 0.0))
      fail(ErrorCode::non_positive_parameter, "pitch and wavelength must be > 0");
    check_sampling(nx, pitch, wavelength, z);
    check_sampling(ny, pitch, wavelength, z);

    const double inv_lambda_sq = 1.0 / (wavelength * wavelength);
    for (int ky = 0; ky < ny; ++ky) {
      const double fy = fft_freq(ky, ny, pitch);
      for (int kx = 0; kx < nx; ++kx) {
        const double fx = fft_freq(kx, nx, pitch);
        const double arg = inv_lambda_sq - fx * fx - fy * fy;
        transfer_.at(kx, ky) =
            arg < 0.0 ? std::complex<double>(0.0, 0.0)
                      : std::polar(1.0, 2.0 * M_PI * z * std::sqrt(arg));
      }
    }
  }

  /// Applies the transfer function: field -> ifft(H * fft(field)).
  void apply(ComplexGrid& field) {
    require(field);
    fft2(field, scratch_);
    for (std::size_t k = 0; k < scratch_.size(); ++k) scratch_[k] *= transfer_[k];
    ifft2(scratch_, field);
  }

 private:
  static void check_sampling(int n, double pitch, double wavelength, double z) {
    // One-step transfer propagation aliases once the chirp exceeds the grid
    // band: lambda * z / (n * pitch^2) must not pass 1.
    if (n <= 1) return;
    const double ratio = wavelength * z / (static_cast<double>(n) * pitch * pitch);
    if (ratio > 1.0)
      fail(ErrorCode::aliased_propagation,
           "propagation undersampled: lambda*z/(n*pitch^2) = " + std::to_string(ratio));
  }

  void require(const ComplexGrid& field) const {
    if (!field.same_dims(transfer_))
      fail(ErrorCode::dimension_mismatch, "field does not match transfer grid");
  }

  ComplexGrid transfer_;
  ComplexGrid scratch_;
};

inline ComplexField angular_spectrum_propagate(const ComplexField& f, double z) {
  AngularSpectrum prop(f.grid.nx, f.grid.ny, f.pitch, f.wavelength, z);
  ComplexField out = f;
  prop.apply(out.grid);
  return out;
}

/// Ensemble-averaged intensity a distance z3 past the object: speckle field
/// times mask amplitude, propagated, squared, averaged over frame_count
/// statistically independent realizations.
///
/// The transmitted field is kept on the synthesis grid (config grid plus the
/// stationarity padding) for the propagation step, with the mask continued
/// into the padding by edge replication, and cropped afterwards. Propagating
/// the crop directly would wrap the field at the frame edge and imprint a
/// spurious spatial structure on the average.
inline RealGrid direct_image(const OpticalConfig& cfg, const ObjectMask& mask, double z3,
                             int frame_count, std::int64_t first_frame = 0) {
  if (frame_count < 1)
    fail(ErrorCode::non_positive_parameter, "direct_image needs at least one frame");
  if (mask.t.nx != cfg.nx || mask.t.ny != cfg.ny)
    fail(ErrorCode::dimension_mismatch, "mask does not match config grid");

  SpeckleSynth synth(cfg);
  const int px = synth.padded_nx(), py = synth.padded_ny();
  const int ox = synth.crop_x0(), oy = synth.crop_y0();
  AngularSpectrum prop(px, py, cfg.pitch, cfg.wavelength, z3);

  RealGrid t_padded(px, py);
  for (int y = 0; y < py; ++y) {
    const int ym = std::clamp(y - oy, 0, cfg.ny - 1);
    for (int x = 0; x < px; ++x) {
      const int xm = std::clamp(x - ox, 0, cfg.nx - 1);
      t_padded.at(x, y) = mask.t.at(xm, ym);
    }
  }

  RealGrid sum(cfg.nx, cfg.ny, 0.0);
  ComplexGrid field(px, py);
  for (int k = 0; k < frame_count; ++k) {
    field = synth.padded_field(first_frame + k);
    for (std::size_t i = 0; i < field.size(); ++i) field[i] *= t_padded[i];
    prop.apply(field);
    for (int y = 0; y < cfg.ny; ++y)
      for (int x = 0; x < cfg.nx; ++x) sum.at(x, y) += std::norm(field.at(ox + x, oy + y));
  }
  const double inv = 1.0 / static_cast<double>(frame_count);
  for (auto& v : sum.data) v *= inv;
  return sum;
}

}  // namespace ghost
