#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ghost/config.hpp"
#include "ghost/correlate.hpp"
#include "ghost/detect.hpp"
#include "ghost/grid.hpp"
#include "ghost/mask.hpp"
#include "ghost/rng.hpp"
#include "ghost/speckle.hpp"

namespace {

ghost::OpticalConfig small_config() {
  ghost::OpticalConfig cfg;
  cfg.nx = cfg.ny = 64;
  cfg.pitch = ghost::coherence_length(cfg) / 4.0;
  return cfg;
}

struct ToyData {
  ghost::BucketSeries buckets;
  ghost::FrameEnsemble ensemble;
};

/// Deterministic positive toy data, small enough for brute-force checks.
ToyData make_toy(int frames, int nx, int ny, std::uint64_t salt = 0) {
  ToyData toy;
  ghost::RngStream rng(ghost::stream_seed(7, salt, ghost::RngDomain::test));
  for (int t = 0; t < frames; ++t) {
    ghost::SpeckleFrame f;
    f.frame_index = t;
    f.intensity = ghost::RealGrid(nx, ny);
    for (double& v : f.intensity.data) v = 0.05 + rng.uniform();
    toy.buckets.append(0.1 + 2.0 * rng.uniform());
    toy.ensemble.append(std::move(f));
  }
  return toy;
}

/// Reference estimator written the slow way, with the per-bucket divisors
/// n and N-n kept in place so their cancellation is exercised, not assumed.
ghost::RealGrid brute_force_gamma(const ToyData& toy, ghost::CorrelationOrder order) {
  const int frames = static_cast<int>(toy.buckets.count());
  const int nx = toy.ensemble.frames[0].intensity.nx;
  const int ny = toy.ensemble.frames[0].intensity.ny;
  const int n = order.n, m = order.N - order.n;

  double s_mean = 0.0;
  for (double s : toy.buckets.s) s_mean += s / n;
  s_mean /= frames;

  ghost::RealGrid i_mean(nx, ny, 0.0);
  for (const ghost::SpeckleFrame& f : toy.ensemble.frames)
    for (std::size_t k = 0; k < i_mean.data.size(); ++k)
      i_mean.data[k] += f.intensity.data[k] / m;
  for (double& v : i_mean.data) v /= frames;

  ghost::RealGrid gamma(nx, ny, 0.0);
  for (int t = 0; t < frames; ++t) {
    const double sp = std::pow(toy.buckets.s[static_cast<std::size_t>(t)] / n, n);
    const auto& frame = toy.ensemble.frames[static_cast<std::size_t>(t)].intensity;
    for (std::size_t k = 0; k < gamma.data.size(); ++k)
      gamma.data[k] += sp * std::pow(frame.data[k] / m, m);
  }
  for (std::size_t k = 0; k < gamma.data.size(); ++k)
    gamma.data[k] /= frames * std::pow(s_mean, n) * std::pow(i_mean.data[k], m);
  return gamma;
}

ghost::GhostImage run_accumulator(const ToyData& toy, ghost::CorrelationOrder order) {
  const int nx = toy.ensemble.frames[0].intensity.nx;
  const int ny = toy.ensemble.frames[0].intensity.ny;
  ghost::CorrAccumulator acc(order, nx, ny);
  for (std::size_t t = 0; t < toy.ensemble.frames.size(); ++t)
    acc.add(toy.buckets.s[t], toy.ensemble.frames[t].intensity);
  acc.freeze_means();
  for (std::size_t t = 0; t < toy.ensemble.frames.size(); ++t)
    acc.add(toy.buckets.s[t], toy.ensemble.frames[t].intensity);
  return acc.finalize();
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    worst = std::max(worst, std::abs(a[k] - b[k]) / std::abs(b[k]));
  return worst;
}

}  // namespace

TEST_CASE("two frames and one pixel reproduce the hand-computed value") {
  ToyData toy;
  ghost::SpeckleFrame f0;
  f0.frame_index = 0;
  f0.intensity = ghost::RealGrid(1, 1, 3.0);
  ghost::SpeckleFrame f1;
  f1.frame_index = 1;
  f1.intensity = ghost::RealGrid(1, 1, 1.0);
  toy.ensemble.append(std::move(f0));
  toy.ensemble.append(std::move(f1));
  toy.buckets.append(1.0);
  toy.buckets.append(2.0);

  // mean(s*i) = 2.5, mean(s) = 1.5, mean(i) = 2.0, gamma = 2.5 / 3.0
  const ghost::GhostImage batch = ghost::gamma_image(toy.buckets, toy.ensemble, {2, 1});
  CHECK(batch.gamma.at(0, 0) == Catch::Approx(2.5 / 3.0).epsilon(1e-12));
  const ghost::GhostImage streamed = run_accumulator(toy, {2, 1});
  CHECK(streamed.gamma.at(0, 0) == Catch::Approx(2.5 / 3.0).epsilon(1e-12));
  CHECK(streamed.frames_used == 2);
}

TEST_CASE("constant inputs give a flat map at one") {
  ToyData toy;
  for (int t = 0; t < 5; ++t) {
    ghost::SpeckleFrame f;
    f.frame_index = t;
    f.intensity = ghost::RealGrid(4, 3, 2.5);
    toy.ensemble.append(std::move(f));
    toy.buckets.append(7.0);
  }
  for (const ghost::CorrelationOrder order :
       {ghost::CorrelationOrder{2, 1}, ghost::CorrelationOrder{5, 2},
        ghost::CorrelationOrder{10, 9}}) {
    const ghost::GhostImage img = ghost::gamma_image(toy.buckets, toy.ensemble, order);
    for (double v : img.gamma.data) CHECK(v == Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gamma is invariant under rescaling of either input") {
  const ToyData toy = make_toy(20, 4, 4);
  ToyData scaled;
  const double alpha = 3.7, beta = 0.021;
  for (std::size_t t = 0; t < toy.ensemble.frames.size(); ++t) {
    ghost::SpeckleFrame f;
    f.frame_index = toy.ensemble.frames[t].frame_index;
    f.intensity = toy.ensemble.frames[t].intensity;
    for (double& v : f.intensity.data) v *= beta;
    scaled.ensemble.append(std::move(f));
    scaled.buckets.append(alpha * toy.buckets.s[t]);
  }
  for (const ghost::CorrelationOrder order :
       {ghost::CorrelationOrder{2, 1}, ghost::CorrelationOrder{4, 3},
        ghost::CorrelationOrder{6, 2}}) {
    const ghost::GhostImage a = ghost::gamma_image(toy.buckets, toy.ensemble, order);
    const ghost::GhostImage b = ghost::gamma_image(scaled.buckets, scaled.ensemble, order);
    CHECK(max_rel_diff(a.gamma.data, b.gamma.data) < 1e-12);
  }
}

TEST_CASE("the per-bucket divisors cancel against the normalization") {
  const ToyData toy = make_toy(10, 4, 4, 1);
  for (const ghost::CorrelationOrder order :
       {ghost::CorrelationOrder{2, 1}, ghost::CorrelationOrder{5, 2},
        ghost::CorrelationOrder{8, 7}}) {
    const ghost::RealGrid reference = brute_force_gamma(toy, order);
    const ghost::GhostImage batch = ghost::gamma_image(toy.buckets, toy.ensemble, order);
    const ghost::GhostImage streamed = run_accumulator(toy, order);
    CHECK(max_rel_diff(batch.gamma.data, reference.data) < 1e-12);
    CHECK(max_rel_diff(streamed.gamma.data, reference.data) < 1e-12);
  }
}

TEST_CASE("batch and streamed estimators agree") {
  const ToyData toy = make_toy(50, 6, 5, 2);
  for (const ghost::CorrelationOrder order :
       {ghost::CorrelationOrder{2, 1}, ghost::CorrelationOrder{4, 2},
        ghost::CorrelationOrder{10, 9}}) {
    const ghost::GhostImage batch = ghost::gamma_image(toy.buckets, toy.ensemble, order);
    const ghost::GhostImage streamed = run_accumulator(toy, order);
    CHECK(max_rel_diff(streamed.gamma.data, batch.gamma.data) < 1e-12);
  }
}

TEST_CASE("frame order does not matter") {
  const ToyData toy = make_toy(200, 4, 4, 3);
  const ghost::GhostImage base = ghost::gamma_image(toy.buckets, toy.ensemble, {4, 2});

  std::vector<std::size_t> perm(toy.ensemble.frames.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  ghost::RngStream rng(ghost::stream_seed(7, 99, ghost::RngDomain::test));
  for (std::size_t k = perm.size(); k > 1; --k)
    std::swap(perm[k - 1], perm[static_cast<std::size_t>(rng.next_u64() % k)]);

  ToyData shuffled;
  for (std::size_t t = 0; t < perm.size(); ++t) {
    ghost::SpeckleFrame f;
    f.frame_index = static_cast<std::int64_t>(t);
    f.intensity = toy.ensemble.frames[perm[t]].intensity;
    shuffled.ensemble.append(std::move(f));
    shuffled.buckets.append(toy.buckets.s[perm[t]]);
  }
  const ghost::GhostImage permuted = ghost::gamma_image(shuffled.buckets, shuffled.ensemble, {4, 2});
  CHECK(max_rel_diff(permuted.gamma.data, base.gamma.data) < 1e-9);
}

TEST_CASE("normalization fixes the peak at one and is idempotent") {
  const ToyData toy = make_toy(30, 5, 4, 4);
  const ghost::GhostImage img = ghost::gamma_image(toy.buckets, toy.ensemble, {3, 2});
  const ghost::GhostImage unit = ghost::normalize_image(img);
  CHECK(ghost::grid_max(unit.gamma) == 1.0);
  const ghost::GhostImage twice = ghost::normalize_image(unit);
  for (std::size_t k = 0; k < unit.gamma.data.size(); ++k)
    REQUIRE(twice.gamma.data[k] == unit.gamma.data[k]);

  ghost::GhostImage zero;
  zero.gamma = ghost::RealGrid(3, 3, 0.0);
  try {
    ghost::normalize_image(zero);
    FAIL("expected an error");
  } catch (const ghost::Error& e) {
    CHECK(e.code() == ghost::ErrorCode::all_zero_image);
  }
}

TEST_CASE("same-point correlation oracles") {
  CHECK(ghost::g_same_point({1.0, 1.0, 1.0, 1.0}, 3) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(ghost::g_same_point({0.0, 2.0}, 2) == Catch::Approx(2.0).epsilon(1e-12));

  ghost::RngStream rng(ghost::stream_seed(7, 5, ghost::RngDomain::test));
  std::vector<double> exponential(200000);
  for (double& v : exponential) v = -std::log(rng.uniform_pos());
  CHECK(ghost::g_same_point(exponential, 3) == Catch::Approx(6.0).epsilon(0.10));

  CHECK_THROWS_AS(ghost::g_same_point({1.0}, 2), ghost::Error);
  try {
    ghost::g_same_point({0.0, 0.0, 0.0}, 2);
    FAIL("expected an error");
  } catch (const ghost::Error& e) {
    CHECK(e.code() == ghost::ErrorCode::zero_mean);
  }
}

TEST_CASE("degenerate inputs are rejected") {
  const ToyData toy = make_toy(10, 3, 3, 6);

  ghost::BucketSeries short_series;
  short_series.append(1.0);
  CHECK_THROWS_AS(ghost::gamma_image(short_series, toy.ensemble, {2, 1}), ghost::Error);

  ghost::FrameEnsemble empty;
  ghost::BucketSeries none;
  try {
    ghost::gamma_image(none, empty, {2, 1});
    FAIL("expected an error");
  } catch (const ghost::Error& e) {
    CHECK(e.code() == ghost::ErrorCode::too_few_frames);
  }

  ToyData dead_pixel = make_toy(10, 3, 3, 7);
  for (ghost::SpeckleFrame& f : dead_pixel.ensemble.frames) f.intensity.at(1, 1) = 0.0;
  try {
    ghost::gamma_image(dead_pixel.buckets, dead_pixel.ensemble, {2, 1});
    FAIL("expected an error");
  } catch (const ghost::Error& e) {
    CHECK(e.code() == ghost::ErrorCode::zero_mean_pixel);
  }

  ToyData dark = make_toy(10, 3, 3, 8);
  for (double& s : dark.buckets.s) s = 0.0;
  try {
    ghost::gamma_image(dark.buckets, dark.ensemble, {2, 1});
    FAIL("expected an error");
  } catch (const ghost::Error& e) {
    CHECK(e.code() == ghost::ErrorCode::zero_mean);
  }
}

TEST_CASE("accumulator pass discipline") {
  const ToyData toy = make_toy(4, 2, 2, 9);
  ghost::CorrAccumulator acc({2, 1}, 2, 2);

  try {
    acc.finalize();
    FAIL("expected an error");
  } catch (const ghost::Error& e) {
    CHECK(e.code() == ghost::ErrorCode::pass_order_violation);
  }

  try {
    acc.freeze_means();
    FAIL("expected an error");
  } catch (const ghost::Error& e) {
    CHECK(e.code() == ghost::ErrorCode::too_few_frames);
  }

  for (std::size_t t = 0; t < 4; ++t) acc.add(toy.buckets.s[t], toy.ensemble.frames[t].intensity);
  acc.freeze_means();
  CHECK_THROWS_AS(acc.freeze_means(), ghost::Error);

  acc.add(toy.buckets.s[0], toy.ensemble.frames[0].intensity);
  try {
    acc.finalize();
    FAIL("expected an error");
  } catch (const ghost::Error& e) {
    CHECK(e.code() == ghost::ErrorCode::too_few_frames);
  }
}

TEST_CASE("merging requires compatible accumulators") {
  const ToyData toy = make_toy(8, 2, 2, 10);
  const auto feed = [&](ghost::CorrAccumulator& acc, std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t)
      acc.add(toy.buckets.s[t], toy.ensemble.frames[t].intensity);
  };

  ghost::CorrAccumulator a({2, 1}, 2, 2), b({3, 1}, 2, 2);
  feed(a, 0, 4);
  feed(b, 4, 8);
  try {
    a.merge_from(b);
    FAIL("expected an error");
  } catch (const ghost::Error& e) {
    CHECK(e.code() == ghost::ErrorCode::incompatible_accumulators);
  }

  ghost::CorrAccumulator c({2, 1}, 2, 2), d({2, 1}, 2, 2);
  feed(c, 0, 4);
  feed(d, 4, 8);
  c.freeze_means();
  CHECK_THROWS_AS(c.merge_from(d), ghost::Error);

  ghost::CorrAccumulator e({2, 1}, 2, 2);
  feed(e, 4, 8);
  e.freeze_means();  // different means than c
  CHECK_THROWS_AS(c.merge_from(e), ghost::Error);
}

TEST_CASE("shard merging reproduces the single-pass result") {
  const ToyData toy = make_toy(40, 3, 3, 11);
  const ghost::CorrelationOrder order{4, 3};
  const ghost::GhostImage whole = run_accumulator(toy, order);

  ghost::CorrAccumulator left(order, 3, 3), right(order, 3, 3);
  for (std::size_t t = 0; t < 40; ++t)
    (t < 17 ? left : right).add(toy.buckets.s[t], toy.ensemble.frames[t].intensity);
  left.merge_from(right);
  left.freeze_means();

  ghost::CorrAccumulator cross_left(order, 3, 3), cross_right(order, 3, 3);
  cross_left.freeze_means(left.s_mean(), left.i_mean(), left.mean_count());
  cross_right.freeze_means(left.s_mean(), left.i_mean(), left.mean_count());
  for (std::size_t t = 0; t < 40; ++t)
    (t < 23 ? cross_left : cross_right).add(toy.buckets.s[t], toy.ensemble.frames[t].intensity);

  // Merge identity: folding in an untouched clone changes nothing.
  ghost::CorrAccumulator idle(order, 3, 3);
  idle.freeze_means(left.s_mean(), left.i_mean(), left.mean_count());
  cross_left.merge_from(idle);

  ghost::CorrAccumulator ab = cross_left;
  ab.merge_from(cross_right);
  const ghost::GhostImage split = ab.finalize();
  CHECK(max_rel_diff(split.gamma.data, whole.gamma.data) < 1e-9);

  ghost::CorrAccumulator ba = cross_right;
  ba.merge_from(cross_left);
  const ghost::GhostImage swapped = ba.finalize();
  CHECK(max_rel_diff(swapped.gamma.data, split.gamma.data) < 1e-9);
}

TEST_CASE("gamma maps are non-negative") {
  for (std::uint64_t salt = 20; salt < 40; ++salt) {
    const ToyData toy = make_toy(12, 3, 2, salt);
    for (const ghost::CorrelationOrder order :
         {ghost::CorrelationOrder{2, 1}, ghost::CorrelationOrder{6, 5}}) {
      const ghost::GhostImage img = ghost::gamma_image(toy.buckets, toy.ensemble, order);
      CHECK(ghost::grid_min(img.gamma) >= 0.0);
    }
  }
}

TEST_CASE("an uncorrelated bucket flattens gamma to the factored moments") {
  const ghost::OpticalConfig cfg = small_config();
  const ghost::ObjectMask mask = ghost::make_builtin_glyph(cfg, 2);
  ghost::SpeckleSynth synth(cfg);
  const int frames = 2000;
  const ghost::CorrelationOrder order{4, 2};

  // Buckets taken from a frame sequence far away from the reference frames,
  // so the two inputs are statistically independent and gamma factorizes.
  ToyData toy;
  ghost::CompensatedSum s_pow_sum, s_sum;
  for (int t = 0; t < frames; ++t) {
    toy.ensemble.append(synth.frame(t));
    const double s = ghost::bucket_signal(synth.frame(t + 1000000), mask, cfg.pitch);
    toy.buckets.append(s);
    s_sum.add(s);
  }
  const double s_mean = s_sum.value() / frames;
  for (int t = 0; t < frames; ++t)
    s_pow_sum.add(ghost::pow_int(toy.buckets.s[static_cast<std::size_t>(t)] / s_mean, order.n));

  const ghost::GhostImage img = ghost::gamma_image(toy.buckets, toy.ensemble, order);
  const double gamma_mean = ghost::grid_mean(img.gamma);

  // Independent factors: <(s/s_mean)^n> times <(i/i_mean)^(N-n)> with the
  // second factor equal to (N-n)! = 2 for thermal statistics.
  const double expected = (s_pow_sum.value() / frames) * 2.0;
  CHECK(gamma_mean == Catch::Approx(expected).epsilon(0.10));
}

TEST_CASE("quadrupling the frame count tightens the estimate") {
  ghost::OpticalConfig cfg;
  cfg.nx = 32;
  cfg.ny = 1;
  cfg.pitch = ghost::coherence_length(cfg) / 4.0;
  const ghost::ObjectMask mask = ghost::make_pinhole(cfg);
  const ghost::CorrelationOrder order{2, 1};
  const std::vector<const ghost::ObjectMask*> masks{&mask};
  const std::vector<ghost::CorrelationOrder> orders{order};

  ghost::StreamOptions ref_opt;
  ref_opt.first_frame = 10000000;
  const ghost::GhostImage reference =
      ghost::gamma_streamed(cfg, masks, orders, 100000, ref_opt)[0];

  const auto rms_error = [&](const ghost::GhostImage& img) {
    double sum = 0.0;
    for (std::size_t k = 0; k < img.gamma.data.size(); ++k) {
      const double d = img.gamma.data[k] - reference.gamma.data[k];
      sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(img.gamma.data.size()));
  };

  int wins = 0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    ghost::StreamOptions opt;
    opt.first_frame = static_cast<std::int64_t>(rep) * 10000;
    const ghost::GhostImage coarse = ghost::gamma_streamed(cfg, masks, orders, 500, opt)[0];
    const ghost::GhostImage fine = ghost::gamma_streamed(cfg, masks, orders, 2000, opt)[0];
    if (rms_error(fine) < rms_error(coarse)) ++wins;
  }
  CHECK(wins >= 19);
}

TEST_CASE("streamed estimator matches the batch path on real frames") {
  const ghost::OpticalConfig cfg = [] {
    ghost::OpticalConfig c;
    c.nx = c.ny = 32;
    c.pitch = ghost::coherence_length(c) / 4.0;
    return c;
  }();
  const ghost::ObjectMask mask = ghost::make_builtin_glyph(cfg, 1);
  const int frames = 400;

  const ghost::FrameEnsemble ensemble = ghost::generate_ensemble(cfg, 0, frames);
  ghost::BucketSeries buckets;
  for (const ghost::SpeckleFrame& f : ensemble.frames)
    buckets.append(ghost::bucket_signal(f, mask, cfg.pitch));

  const std::vector<ghost::CorrelationOrder> orders{{2, 1}, {4, 3}};
  const std::vector<ghost::GhostImage> streamed =
      ghost::gamma_streamed(cfg, {&mask}, orders, frames);
  for (std::size_t o = 0; o < orders.size(); ++o) {
    const ghost::GhostImage batch = ghost::gamma_image(buckets, ensemble, orders[o]);
    CHECK(max_rel_diff(streamed[o].gamma.data, batch.gamma.data) < 1e-9);
  }
}

TEST_CASE("bit-exact mode is independent of the thread count") {
  const ghost::OpticalConfig cfg = [] {
    ghost::OpticalConfig c;
    c.nx = c.ny = 32;
    c.pitch = ghost::coherence_length(c) / 4.0;
    return c;
  }();
  const ghost::ObjectMask mask = ghost::make_builtin_glyph(cfg, 1);
  const std::vector<ghost::CorrelationOrder> orders{{3, 2}};

  ghost::StreamOptions one;
  one.threads = 1;
  one.bit_exact = true;
  ghost::StreamOptions four;
  four.threads = 4;
  four.bit_exact = true;

  const ghost::GhostImage a = ghost::gamma_streamed(cfg, {&mask}, orders, 320, one)[0];
  const ghost::GhostImage b = ghost::gamma_streamed(cfg, {&mask}, orders, 320, four)[0];
  REQUIRE(a.gamma.data.size() == b.gamma.data.size());
  for (std::size_t k = 0; k < a.gamma.data.size(); ++k) REQUIRE(a.gamma.data[k] == b.gamma.data[k]);
}
