#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ghost/errors.hpp"
#include "ghost/grid.hpp"

namespace ghost {

/// Raw binary PGM (P5) contents, 8 or 16 bit.
struct PgmImage {
  int nx = 0;
  int ny = 0;
  int maxval = 0;
  std::vector<std::uint16_t> pixels;  ///< row-major, top row first
};

namespace detail {

inline int pgm_next_token(std::istream& in, const std::string& path) {
  // Skips whitespace and '#' comment lines, then reads one ASCII integer.
  for (;;) {
    const int c = in.peek();
    if (c == EOF) fail(ErrorCode::malformed_file, path + ": truncated PGM header");
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    break;
  }
  int value = 0;
  if (!(in >> value)) fail(ErrorCode::malformed_file, path + ": bad integer in PGM header");
  return value;
}

}  // namespace detail

inline PgmImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, path + ": cannot open");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '5')
    fail(ErrorCode::malformed_file, path + ": not a binary PGM (P5)");

  PgmImage img;
  img.nx = detail::pgm_next_token(in, path);
  img.ny = detail::pgm_next_token(in, path);
  img.maxval = detail::pgm_next_token(in, path);
  if (img.nx <= 0 || img.ny <= 0)
    fail(ErrorCode::malformed_file, path + ": non-positive PGM dimensions");
  if (img.maxval <= 0 || img.maxval > 65535)
    fail(ErrorCode::malformed_file, path + ": PGM maxval out of range");
  in.get();  // single whitespace byte before raster

  const std::size_t count = static_cast<std::size_t>(img.nx) * img.ny;
  const bool wide = img.maxval > 255;
  std::vector<char> raw(count * (wide ? 2 : 1));
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    fail(ErrorCode::malformed_file,
         path + ": truncated PGM raster, got " + std::to_string(in.gcount()) + " of " +
             std::to_string(raw.size()) + " bytes");

  img.pixels.resize(count);
  if (wide) {
    for (std::size_t k = 0; k < count; ++k) {
      const auto hi = static_cast<std::uint8_t>(raw[2 * k]);
      const auto lo = static_cast<std::uint8_t>(raw[2 * k + 1]);
      img.pixels[k] = static_cast<std::uint16_t>((hi << 8) | lo);
    }
  } else {
    for (std::size_t k = 0; k < count; ++k)
      img.pixels[k] = static_cast<std::uint8_t>(raw[k]);
  }
  return img;
}

/// Writes values in [0, 1] as a 16-bit binary PGM (maxval 65535, big-endian
/// sample bytes per the format).
inline void write_pgm16(const std::string& path, const RealGrid& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_error, path + ": cannot open for writing");
  out << "P5\n" << values.nx << " " << values.ny << "\n65535\n";
  std::vector<char> raw(values.size() * 2);
  for (std::size_t k = 0; k < values.size(); ++k) {
    double v = values[k];
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    const auto q = static_cast<std::uint16_t>(v * 65535.0 + 0.5);
    raw[2 * k] = static_cast<char>(q >> 8);
    raw[2 * k + 1] = static_cast<char>(q & 0xFF);
  }
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) fail(ErrorCode::io_error, path + ": write failed");
}

}  // namespace ghost
