#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <string>

#include "ghost/config.hpp"
#include "ghost/errors.hpp"
#include "ghost/grid.hpp"
#include "ghost/pgm.hpp"

namespace ghost {

/// Field transmission of the object: real amplitudes in [0, 1] on the
/// detector grid. Intensity transmission is t^2.
struct ObjectMask {
  RealGrid t;

  ObjectMask() : t(1, 1) {}
  explicit ObjectMask(RealGrid grid) : t(std::move(grid)) {
    for (double v : t.data)
      if (!(v >= 0.0 && v <= 1.0))
        fail(ErrorCode::range_error, "mask amplitude outside [0, 1]");
  }
};

/// Support predicate used everywhere a binary in/out split is needed:
/// intensity transmission above one half.
inline bool in_support(const ObjectMask& mask, int x, int y) {
  const double t = mask.t.at(x, y);
  return t * t > 0.5;
}

inline std::size_t support_count(const ObjectMask& mask) {
  std::size_t count = 0;
  for (double v : mask.t.data)
    if (v * v > 0.5) ++count;
  return count;
}

/// Two transparent bars of width a and height h, center-to-center distance d,
/// centered on the grid. Lengths in meters.
inline ObjectMask make_double_slit(const OpticalConfig& cfg, double slit_width,
                                   double separation, double slit_height) {
  if (!(slit_width > 0.0 && separation > 0.0 && slit_height > 0.0))
    fail(ErrorCode::non_positive_parameter, "double slit dimensions must be > 0");
  if (separation <= slit_width)
    fail(ErrorCode::invalid_argument, "slit separation must exceed slit width");

  const int w = static_cast<int>(std::lround(slit_width / cfg.pitch));
  const int sep = static_cast<int>(std::lround(separation / cfg.pitch));
  const int h = static_cast<int>(std::lround(slit_height / cfg.pitch));
  if (w < 1 || h < 1)
    fail(ErrorCode::invalid_argument, "slit width/height below one pixel");
  if (sep <= w) fail(ErrorCode::invalid_argument, "slits overlap after rasterization");

  const int extent = sep + w;
  const int x0 = (cfg.nx - extent) / 2;
  const int y0 = (cfg.ny - h) / 2;
  if (x0 < 0 || x0 + extent > cfg.nx || y0 < 0 || y0 + h > cfg.ny)
    fail(ErrorCode::geometry_too_large,
         "double slit spans " + std::to_string(extent) + "x" + std::to_string(h) +
             " pixels, grid is " + std::to_string(cfg.nx) + "x" + std::to_string(cfg.ny));

  RealGrid t(cfg.nx, cfg.ny, 0.0);
  for (int y = y0; y < y0 + h; ++y)
    for (int xb : {x0, x0 + sep})
      for (int x = xb; x < xb + w; ++x) t.at(x, y) = 1.0;
  return ObjectMask(std::move(t));
}

/// Centered transparent square of the given side length.
inline ObjectMask make_square(const OpticalConfig& cfg, double side) {
  if (!(side > 0.0)) fail(ErrorCode::non_positive_parameter, "square side must be > 0");
  const int s = static_cast<int>(std::lround(side / cfg.pitch));
  if (s < 1) fail(ErrorCode::invalid_argument, "square side below one pixel");
  const int x0 = (cfg.nx - s) / 2;
  const int y0 = (cfg.ny - s) / 2;
  if (x0 < 0 || y0 < 0 || x0 + s > cfg.nx || y0 + s > cfg.ny)
    fail(ErrorCode::geometry_too_large, "square of " + std::to_string(s) +
                                            " pixels does not fit the grid");
  RealGrid t(cfg.nx, cfg.ny, 0.0);
  for (int y = y0; y < y0 + s; ++y)
    for (int x = x0; x < x0 + s; ++x) t.at(x, y) = 1.0;
  return ObjectMask(std::move(t));
}

/// Single transparent pixel at the grid center.
inline ObjectMask make_pinhole(const OpticalConfig& cfg) {
  RealGrid t(cfg.nx, cfg.ny, 0.0);
  t.at(cfg.nx / 2, cfg.ny / 2) = 1.0;
  return ObjectMask(std::move(t));
}

namespace detail {

// 12x12 stand-in glyph used by the 2D scenarios: a lantern-like figure with
// stroke widths comparable to the coherence length at the default pitch.
inline const std::array<const char*, 12>& glyph_rows() {
  static const std::array<const char*, 12> rows = {
      ".....##.....",
      ".#...##...#.",
      "..#..##..#..",
      "...#....#...",
      "############",
      "............",
      "....#..#....",
      "...#....#...",
      "..#......#..",
      ".#...##...#.",
      ".....##.....",
      ".....##.....",
  };
  return rows;
}

}  // namespace detail

/// Built-in 2D test object: the 12x12 glyph upscaled by an integer factor
/// and centered on the grid.
inline ObjectMask make_builtin_glyph(const OpticalConfig& cfg, int scale) {
  if (scale < 1) fail(ErrorCode::non_positive_parameter, "glyph scale must be >= 1");
  const auto& rows = detail::glyph_rows();
  const int cells = static_cast<int>(rows.size());
  const int span = cells * scale;
  const int x0 = (cfg.nx - span) / 2;
  const int y0 = (cfg.ny - span) / 2;
  if (x0 < 0 || y0 < 0 || x0 + span > cfg.nx || y0 + span > cfg.ny)
    fail(ErrorCode::geometry_too_large, "glyph of " + std::to_string(span) +
                                            " pixels does not fit the grid");
  RealGrid t(cfg.nx, cfg.ny, 0.0);
  for (int cy = 0; cy < cells; ++cy) {
    const char* row = rows[static_cast<std::size_t>(cy)];
    for (int cx = 0; cx < cells; ++cx) {
      if (row[cx] != '#') continue;
      for (int dy = 0; dy < scale; ++dy)
        for (int dx = 0; dx < scale; ++dx)
          t.at(x0 + cx * scale + dx, y0 + cy * scale + dy) = 1.0;
    }
  }
  return ObjectMask(std::move(t));
}

/// Loads a binary PGM (P5, 8 or 16 bit) as a mask, gray levels mapped
/// linearly to [0, 1]. Dimensions must match the config grid.
inline ObjectMask load_mask_pgm(const std::string& path, const OpticalConfig& cfg) {
  const PgmImage img = read_pgm(path);
  if (img.nx != cfg.nx || img.ny != cfg.ny)
    fail(ErrorCode::dimension_mismatch,
         path + ": PGM is " + std::to_string(img.nx) + "x" + std::to_string(img.ny) +
             ", config grid is " + std::to_string(cfg.nx) + "x" + std::to_string(cfg.ny));
  RealGrid t(img.nx, img.ny);
  const double scale = 1.0 / img.maxval;
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = img.pixels[k] * scale;
  return ObjectMask(std::move(t));
}

}  // namespace ghost
