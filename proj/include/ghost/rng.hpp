#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace ghost {

/// SplitMix64 finalizer. Used to derive independent per-frame stream seeds
/// from (run seed, frame index, purpose tag) so any frame can be generated
/// out of order and in parallel.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stream domains keep RNG draws for different purposes decoupled even at
/// equal (seed, frame_index).
enum class RngDomain : std::uint64_t {
  speckle = 0x5350454B4C453030ULL,
  detector = 0x4445544543543030ULL,
  test = 0x5445535453545354ULL,
};

inline std::uint64_t stream_seed(std::uint64_t run_seed, std::int64_t counter, RngDomain domain) {
  std::uint64_t s = splitmix64(run_seed);
  s = splitmix64(s ^ static_cast<std::uint64_t>(counter));
  s = splitmix64(s ^ static_cast<std::uint64_t>(domain));
  return s;
}

/// Deterministic per-stream generator. Wraps mt19937_64 with hand-rolled
/// uniform/normal transforms so draw sequences do not depend on the standard
/// library implementation.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}

  RngStream(std::uint64_t run_seed, std::int64_t counter, RngDomain domain)
      : eng_(stream_seed(run_seed, counter, domain)) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in (0, 1].
  double uniform_pos() { return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53; }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double phi = 2.0 * M_PI * uniform();
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
  }

  /// Circular complex Gaussian with E|z|^2 = 1.
  std::complex<double> complex_normal() {
    const double r = std::sqrt(-std::log(uniform_pos()));
    const double phi = 2.0 * M_PI * uniform();
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  /// Poisson sample with the given mean. Knuth multiplication for small means;
  /// Gaussian approximation with continuity correction above 30 photons where
  /// the relative error is below a percent. std::poisson_distribution is
  /// avoided because its draw sequence is implementation defined.
  long long poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
      const double limit = std::exp(-mean);
      long long k = 0;
      double p = uniform_pos();
      while (p > limit) {
        ++k;
        p *= uniform_pos();
      }
      return k;
    }
    const double x = std::floor(mean + std::sqrt(mean) * normal() + 0.5);
    return x < 0.0 ? 0 : static_cast<long long>(x);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ghost
