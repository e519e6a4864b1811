#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ghost/errors.hpp"
#include "ghost/grid.hpp"
#include "ghost/speckle.hpp"

namespace ghost {

/// Frame container format, version 1, all fields little-endian:
///   "GIFR"  magic, 4 bytes
///   u16     format version
///   u32     nx, u32 ny, u32 frame count
///   f32[]   count frames of nx*ny row-major samples
///   u64     seed footer (the run seed the frames came from)
/// Intensities are stored at f32 precision; reading promotes exactly.
inline constexpr std::uint16_t kFrameFormatVersion = 1;

namespace detail {

inline void put_bytes(std::vector<char>& out, const void* p, std::size_t n) {
  const char* b = static_cast<const char*>(p);
  out.insert(out.end(), b, b + n);
}

template <typename T>
void put_le(std::vector<char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  ByteReader(std::ifstream& in, const std::string& path) : in_(in), path_(path) {}

  void read(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      fail(ErrorCode::malformed_file, path_ + ": truncated reading " + what + " at byte offset " +
                                          std::to_string(offset_ + in_.gcount()));
    offset_ += n;
  }

  template <typename T>
  T get_le(const char* what) {
    unsigned char raw[sizeof(T)];
    read(raw, sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(raw[i]) << (8 * i);
    return static_cast<T>(v);
  }

  std::size_t offset() const { return offset_; }

 private:
  std::ifstream& in_;
  std::string path_;
  std::size_t offset_ = 0;
};

}  // namespace detail

inline void write_frames(const FrameEnsemble& ensemble, const std::string& path,
                         std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_error, path + ": cannot open for writing");

  const int nx = ensemble.count() ? ensemble.frames.front().intensity.nx : 0;
  const int ny = ensemble.count() ? ensemble.frames.front().intensity.ny : 0;
  std::vector<char> header;
  detail::put_bytes(header, "GIFR", 4);
  detail::put_le<std::uint16_t>(header, kFrameFormatVersion);
  detail::put_le<std::uint32_t>(header, static_cast<std::uint32_t>(nx));
  detail::put_le<std::uint32_t>(header, static_cast<std::uint32_t>(ny));
  detail::put_le<std::uint32_t>(header, static_cast<std::uint32_t>(ensemble.count()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  std::vector<char> raw;
  for (const SpeckleFrame& frame : ensemble.frames) {
    raw.clear();
    raw.reserve(frame.intensity.size() * 4);
    for (double v : frame.intensity.data) {
      const float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      detail::put_le<std::uint32_t>(raw, bits);
    }
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  }

  std::vector<char> footer;
  detail::put_le<std::uint64_t>(footer, seed);
  out.write(footer.data(), static_cast<std::streamsize>(footer.size()));
  if (!out) fail(ErrorCode::io_error, path + ": write failed");
}

/// Reads a frame container. Frame indices are assigned 0..count-1; per-frame
/// seeds are not persisted by the format, so seed_used is left 0 and the run
/// seed is reported through seed_out.
inline FrameEnsemble read_frames(const std::string& path, std::uint64_t* seed_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, path + ": cannot open");
  detail::ByteReader reader(in, path);

  char magic[4];
  reader.read(magic, 4, "magic");
  if (std::memcmp(magic, "GIFR", 4) != 0)
    fail(ErrorCode::malformed_file, path + ": bad magic, not a frame container");
  const auto version = reader.get_le<std::uint16_t>("version");
  if (version != kFrameFormatVersion)
    fail(ErrorCode::version_mismatch, path + ": format version " + std::to_string(version) +
                                          ", expected " + std::to_string(kFrameFormatVersion));
  const auto nx = reader.get_le<std::uint32_t>("nx");
  const auto ny = reader.get_le<std::uint32_t>("ny");
  const auto count = reader.get_le<std::uint32_t>("count");
  if (count > 0 && (nx == 0 || ny == 0))
    fail(ErrorCode::malformed_file, path + ": zero grid dimension with nonzero count");

  FrameEnsemble ensemble;
  ensemble.frames.reserve(count);
  const std::size_t px = static_cast<std::size_t>(nx) * ny;
  std::vector<unsigned char> raw(px * 4);
  for (std::uint32_t t = 0; t < count; ++t) {
    reader.read(raw.data(), raw.size(), "frame raster");
    SpeckleFrame frame;
    frame.intensity = RealGrid(static_cast<int>(nx), static_cast<int>(ny));
    for (std::size_t k = 0; k < px; ++k) {
      const std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * k]) |
                                 (static_cast<std::uint32_t>(raw[4 * k + 1]) << 8) |
                                 (static_cast<std::uint32_t>(raw[4 * k + 2]) << 16) |
                                 (static_cast<std::uint32_t>(raw[4 * k + 3]) << 24);
      float f;
      std::memcpy(&f, &bits, 4);
      frame.intensity[k] = static_cast<double>(f);
    }
    frame.frame_index = t;
    ensemble.append(std::move(frame));
  }
  const auto seed = reader.get_le<std::uint64_t>("seed footer");
  if (seed_out) *seed_out = seed;
  return ensemble;
}

}  // namespace ghost
