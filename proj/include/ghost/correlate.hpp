#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ghost/config.hpp"
#include "ghost/detect.hpp"
#include "ghost/errors.hpp"
#include "ghost/grid.hpp"
#include "ghost/mask.hpp"
#include "ghost/speckle.hpp"

namespace ghost {

/// Reconstructed correlation map gamma_n^(N)(y).
struct GhostImage {
  RealGrid gamma;
  CorrelationOrder order;
  int frames_used = 0;

  GhostImage() : gamma(1, 1) {}
};

/// gamma divided by its maximum; ties for the maximum all map to 1.
inline GhostImage normalize_image(const GhostImage& img) {
  const double peak = grid_max(img.gamma);
  if (!(peak > 0.0)) fail(ErrorCode::all_zero_image, "normalize_image: max(gamma) is not > 0");
  GhostImage out = img;
  for (auto& v : out.gamma.data) v /= peak;
  return out;
}

/// Same-point normalized moment <I^N>/<I>^N (N! for polarized thermal light).
inline double g_same_point(const std::vector<double>& samples, int N) {
  if (N < 1) fail(ErrorCode::invalid_argument, "g_same_point: N must be >= 1");
  if (samples.size() < 2)
    fail(ErrorCode::insufficient_samples, "g_same_point: need at least 2 samples");
  CompensatedSum sum, sum_pow;
  for (double v : samples) {
    sum.add(v);
    sum_pow.add(pow_int(v, N));
  }
  const double n = static_cast<double>(samples.size());
  const double mean = sum.value() / n;
  if (!(mean > 0.0)) fail(ErrorCode::zero_mean, "g_same_point: sample mean is not > 0");
  return (sum_pow.value() / n) / pow_int(mean, N);
}

enum class AccumulatorPass { mean_pass, cross_pass };

/// Mergeable streaming estimator of gamma_n^(N). Two-pass protocol: feed
/// every frame once in the mean pass, freeze the normalizers <s> and <i(y)>,
/// feed every frame again in the cross pass, then finalize. Normalizing
/// before raising to the powers n and N-n keeps all terms O(1), so the
/// estimator stays in double-precision range even at N = 20.
class CorrAccumulator {
 public:
  CorrAccumulator(CorrelationOrder order, int nx, int ny)
      : order_(validate_order(order)), nx_(nx), ny_(ny) {
    if (nx < 1 || ny < 1)
      fail(ErrorCode::non_positive_parameter, "accumulator grid must be at least 1x1");
    const std::size_t px = static_cast<std::size_t>(nx) * ny;
    sum_i_.assign(px, 0.0);
    sum_i_comp_.assign(px, 0.0);
    sum_cross_.assign(px, 0.0);
    sum_cross_comp_.assign(px, 0.0);
  }

  const CorrelationOrder& order() const { return order_; }
  AccumulatorPass pass() const { return pass_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  long long count() const { return pass_ == AccumulatorPass::mean_pass ? mean_count_ : cross_count_; }
  long long mean_count() const { return mean_count_; }
  long long cross_count() const { return cross_count_; }

  /// Adds one (bucket, reference frame) pair to the current pass.
  void add(double s, const RealGrid& frame) {
    if (frame.nx != nx_ || frame.ny != ny_)
      fail(ErrorCode::dimension_mismatch, "accumulator: frame grid mismatch");
    if (pass_ == AccumulatorPass::mean_pass)
      add_mean(s, frame);
    else
      add_cross(s, frame);
  }

  /// Freezes normalizers from this accumulator's own mean pass.
  void freeze_means() {
    if (pass_ != AccumulatorPass::mean_pass)
      fail(ErrorCode::pass_order_violation, "freeze_means: means already frozen");
    if (mean_count_ < 1)
      fail(ErrorCode::too_few_frames, "freeze_means: no frames accumulated");
    const double inv_n = 1.0 / static_cast<double>(mean_count_);
    const double s_hat = sum_s_.value() * inv_n;
    RealGrid i_hat(nx_, ny_);
    for (std::size_t k = 0; k < i_hat.size(); ++k)
      i_hat[k] = (sum_i_[k] + sum_i_comp_[k]) * inv_n;
    adopt_means(s_hat, std::move(i_hat), mean_count_);
  }

  /// Freezes externally computed normalizers (sharded cross passes share the
  /// global means).
  void freeze_means(double s_mean, const RealGrid& i_mean, long long mean_count) {
    if (pass_ != AccumulatorPass::mean_pass)
      fail(ErrorCode::pass_order_violation, "freeze_means: means already frozen");
    if (i_mean.nx != nx_ || i_mean.ny != ny_)
      fail(ErrorCode::dimension_mismatch, "freeze_means: mean grid mismatch");
    if (mean_count < 1) fail(ErrorCode::too_few_frames, "freeze_means: mean_count < 1");
    adopt_means(s_mean, i_mean, mean_count);
  }

  /// Sums and counts add. Accumulators must be at the same pass with the same
  /// order; cross-pass accumulators must share identical frozen means.
  void merge_from(const CorrAccumulator& o) {
    if (order_ != o.order_ || nx_ != o.nx_ || ny_ != o.ny_ || pass_ != o.pass_)
      fail(ErrorCode::incompatible_accumulators,
           "merge: order, grid, or pass stage differ");
    if (pass_ == AccumulatorPass::cross_pass) {
      const bool same_means =
          mean_count_ == o.mean_count_ && s_mean_ == o.s_mean_ &&
          std::memcmp(i_mean_.data.data(), o.i_mean_.data.data(),
                      i_mean_.size() * sizeof(double)) == 0;
      if (!same_means)
        fail(ErrorCode::incompatible_accumulators, "merge: frozen means differ");
      cross_count_ += o.cross_count_;
      sum_s_pow_.merge(o.sum_s_pow_);
      for (std::size_t k = 0; k < sum_cross_.size(); ++k) {
        CompensatedSum acc{sum_cross_[k], sum_cross_comp_[k]};
        acc.merge(CompensatedSum{o.sum_cross_[k], o.sum_cross_comp_[k]});
        sum_cross_[k] = acc.sum;
        sum_cross_comp_[k] = acc.comp;
      }
    } else {
      mean_count_ += o.mean_count_;
      sum_s_.merge(o.sum_s_);
      for (std::size_t k = 0; k < sum_i_.size(); ++k) {
        CompensatedSum acc{sum_i_[k], sum_i_comp_[k]};
        acc.merge(CompensatedSum{o.sum_i_[k], o.sum_i_comp_[k]});
        sum_i_[k] = acc.sum;
        sum_i_comp_[k] = acc.comp;
      }
    }
  }

  GhostImage finalize() const {
    if (pass_ != AccumulatorPass::cross_pass)
      fail(ErrorCode::pass_order_violation, "finalize: means were never frozen");
    if (cross_count_ < 2)
      fail(ErrorCode::too_few_frames,
           "finalize: need >= 2 cross-pass frames, got " + std::to_string(cross_count_));
    GhostImage img;
    img.gamma = RealGrid(nx_, ny_);
    const double inv_n = 1.0 / static_cast<double>(cross_count_);
    for (std::size_t k = 0; k < img.gamma.size(); ++k)
      img.gamma[k] = (sum_cross_[k] + sum_cross_comp_[k]) * inv_n;
    if (!grid_finite(img.gamma))
      fail(ErrorCode::range_error, "finalize: non-finite correlation values");
    img.order = order_;
    img.frames_used = static_cast<int>(cross_count_);
    return img;
  }

  double s_mean() const { return s_mean_; }
  const RealGrid& i_mean() const { return i_mean_; }

  /// Cross-pass mean of (s/<s>)^n; the image background plateau equals this
  /// times the per-pixel mean of (i/<i>)^(N-n) for unpaired data.
  double mean_s_pow() const {
    return cross_count_ ? sum_s_pow_.value() / static_cast<double>(cross_count_) : 0.0;
  }

 private:
  void adopt_means(double s_mean, RealGrid i_mean, long long mean_count) {
    if (!(s_mean > 0.0)) fail(ErrorCode::zero_mean, "freeze_means: <s> is not > 0");
    inv_i_mean_ = RealGrid(nx_, ny_);
    for (std::size_t k = 0; k < i_mean.size(); ++k) {
      if (!(i_mean[k] > 0.0))
        fail(ErrorCode::zero_mean_pixel,
             "freeze_means: <i> is not > 0 at pixel " + std::to_string(k));
      inv_i_mean_[k] = 1.0 / i_mean[k];
    }
    s_mean_ = s_mean;
    inv_s_mean_ = 1.0 / s_mean;
    i_mean_ = std::move(i_mean);
    mean_count_ = mean_count;
    pass_ = AccumulatorPass::cross_pass;
  }

  void add_mean(double s, const RealGrid& frame) {
    ++mean_count_;
    sum_s_.add(s);
    for (std::size_t k = 0; k < frame.size(); ++k) {
      CompensatedSum acc{sum_i_[k], sum_i_comp_[k]};
      acc.add(frame[k]);
      sum_i_[k] = acc.sum;
      sum_i_comp_[k] = acc.comp;
    }
  }

  void add_cross(double s, const RealGrid& frame) {
    ++cross_count_;
    const double s_pow = pow_int(s * inv_s_mean_, order_.n);
    sum_s_pow_.add(s_pow);
    const int ref_pow = order_.N - order_.n;
    double* sums = sum_cross_.data();
    double* comps = sum_cross_comp_.data();
    const double* inv_mean = inv_i_mean_.data.data();
    const double* in = frame.data.data();
    const std::size_t px = frame.size();
    for (std::size_t k = 0; k < px; ++k) {
      const double v = s_pow * pow_int(in[k] * inv_mean[k], ref_pow);
      const double t = sums[k] + v;
      comps[k] += (std::abs(sums[k]) >= std::abs(v)) ? (sums[k] - t) + v : (v - t) + sums[k];
      sums[k] = t;
    }
  }

  CorrelationOrder order_;
  int nx_ = 0, ny_ = 0;
  AccumulatorPass pass_ = AccumulatorPass::mean_pass;

  long long mean_count_ = 0;
  CompensatedSum sum_s_;
  std::vector<double> sum_i_, sum_i_comp_;

  double s_mean_ = 0.0, inv_s_mean_ = 0.0;
  RealGrid i_mean_, inv_i_mean_;

  long long cross_count_ = 0;
  CompensatedSum sum_s_pow_;
  std::vector<double> sum_cross_, sum_cross_comp_;
};

/// Pure-function wrappers over the in-place accumulator operations.
inline CorrAccumulator accumulate(CorrAccumulator acc, double s, const RealGrid& frame) {
  acc.add(s, frame);
  return acc;
}

inline CorrAccumulator merge(CorrAccumulator a, const CorrAccumulator& b) {
  a.merge_from(b);
  return a;
}

/// Batch two-pass evaluation over a materialized ensemble. Pass 1 computes
/// s_hat = mean(s) and i_hat(y); pass 2 averages (s/s_hat)^n (i/i_hat)^(N-n).
/// The 1/n and 1/(N-n) divisors of the definition cancel between numerator
/// and denominator, so this equals the full normalized correlation exactly.
/// Kept as a deliberately plain implementation; the streaming accumulator is
/// validated against it.
inline GhostImage gamma_image(const BucketSeries& buckets, const FrameEnsemble& ref,
                              CorrelationOrder order) {
  validate_order(order);
  if (buckets.count() != ref.count())
    fail(ErrorCode::length_mismatch,
         "gamma_image: " + std::to_string(buckets.count()) + " buckets vs " +
             std::to_string(ref.count()) + " frames");
  const int frames = ref.count();
  if (frames < 2) fail(ErrorCode::too_few_frames, "gamma_image: need >= 2 frames");

  const int nx = ref.frames.front().intensity.nx;
  const int ny = ref.frames.front().intensity.ny;
  const std::size_t px = static_cast<std::size_t>(nx) * ny;

  double s_mean = 0.0;
  for (double v : buckets.s) s_mean += v;
  s_mean /= frames;
  if (!(s_mean > 0.0)) fail(ErrorCode::zero_mean, "gamma_image: <s> is not > 0");

  std::vector<double> i_mean(px, 0.0);
  for (const SpeckleFrame& f : ref.frames)
    for (std::size_t k = 0; k < px; ++k) i_mean[k] += f.intensity[k];
  for (std::size_t k = 0; k < px; ++k) {
    i_mean[k] /= frames;
    if (!(i_mean[k] > 0.0))
      fail(ErrorCode::zero_mean_pixel,
           "gamma_image: <i> is not > 0 at pixel " + std::to_string(k));
  }

  GhostImage img;
  img.gamma = RealGrid(nx, ny, 0.0);
  for (int t = 0; t < frames; ++t) {
    const double s_pow = pow_int(buckets.s[static_cast<std::size_t>(t)] / s_mean, order.n);
    const RealGrid& frame = ref.frames[static_cast<std::size_t>(t)].intensity;
    for (std::size_t k = 0; k < px; ++k)
      img.gamma[k] += s_pow * pow_int(frame[k] / i_mean[k], order.N - order.n);
  }
  for (std::size_t k = 0; k < px; ++k) img.gamma[k] /= frames;
  img.order = order;
  img.frames_used = frames;
  return img;
}

/// Options for the streamed estimator below.
struct StreamOptions {
  int threads = 1;
  bool bit_exact = false;  ///< fixed shard count and reduction order
  std::int64_t first_frame = 0;
};

namespace detail {

constexpr int kBitExactShards = 16;

struct MeanStats {
  long long count = 0;
  std::vector<double> sum_i, sum_i_comp;
  std::vector<CompensatedSum> sum_s;  // one per mask

  MeanStats(std::size_t px, std::size_t masks)
      : sum_i(px, 0.0), sum_i_comp(px, 0.0), sum_s(masks) {}
};

}  // namespace detail

/// Streams deterministic speckle frames through the two-pass estimator for
/// every (mask, order) combination, sharing one frame sequence. Frames are
/// regenerated per pass instead of stored, so memory stays flat in the frame
/// count. Work is split into contiguous frame shards merged in shard order;
/// with bit_exact the shard count is pinned so every output byte is
/// independent of the thread count.
///
/// Returns images indexed [mask_index * orders.size() + order_index].
inline std::vector<GhostImage> gamma_streamed(const OpticalConfig& cfg,
                                              const std::vector<const ObjectMask*>& masks,
                                              const std::vector<CorrelationOrder>& orders,
                                              int frames, StreamOptions opt = {}) {
  validate_config(cfg);
  if (masks.empty() || orders.empty())
    fail(ErrorCode::invalid_argument, "gamma_streamed: need at least one mask and order");
  for (const ObjectMask* m : masks)
    if (m->t.nx != cfg.nx || m->t.ny != cfg.ny)
      fail(ErrorCode::dimension_mismatch, "gamma_streamed: mask grid mismatch");
  for (const CorrelationOrder& o : orders) validate_order(o);
  if (frames < 2) fail(ErrorCode::too_few_frames, "gamma_streamed: need >= 2 frames");

  const int threads = std::max(1, opt.threads);
  const int shards = opt.bit_exact ? detail::kBitExactShards : threads;
  const std::size_t px = static_cast<std::size_t>(cfg.nx) * cfg.ny;
  const std::size_t n_masks = masks.size();
  const std::size_t n_orders = orders.size();

  const auto shard_begin = [&](int j) {
    return opt.first_frame + static_cast<std::int64_t>(j) * frames / shards;
  };

  const auto run_sharded = [&](auto&& work) {
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
      for (;;) {
        const int j = next.fetch_add(1);
        if (j >= shards) return;
        try {
          work(j);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    };
    if (threads == 1 || shards == 1) {
      body();
    } else {
      std::vector<std::thread> pool;
      const int spawn = std::min(threads, shards);
      pool.reserve(static_cast<std::size_t>(spawn));
      for (int t = 0; t < spawn; ++t) pool.emplace_back(body);
      for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
  };

  // Pass 1: global <s> per mask and <i(y)>.
  std::vector<detail::MeanStats> mean_shards(static_cast<std::size_t>(shards),
                                             detail::MeanStats(px, n_masks));
  run_sharded([&](int j) {
    detail::MeanStats& stats = mean_shards[static_cast<std::size_t>(j)];
    SpeckleSynth synth(cfg);
    for (std::int64_t idx = shard_begin(j); idx < shard_begin(j + 1); ++idx) {
      const SpeckleFrame frame = synth.frame(idx);
      ++stats.count;
      for (std::size_t k = 0; k < px; ++k) {
        CompensatedSum acc{stats.sum_i[k], stats.sum_i_comp[k]};
        acc.add(frame.intensity[k]);
        stats.sum_i[k] = acc.sum;
        stats.sum_i_comp[k] = acc.comp;
      }
      for (std::size_t m = 0; m < n_masks; ++m)
        stats.sum_s[m].add(bucket_signal(frame.intensity, *masks[m], cfg.pitch));
    }
  });

  long long total = 0;
  std::vector<CompensatedSum> s_totals(n_masks);
  std::vector<CompensatedSum> i_totals(px);
  for (const detail::MeanStats& stats : mean_shards) {
    total += stats.count;
    for (std::size_t m = 0; m < n_masks; ++m) s_totals[m].merge(stats.sum_s[m]);
    for (std::size_t k = 0; k < px; ++k)
      i_totals[k].merge(CompensatedSum{stats.sum_i[k], stats.sum_i_comp[k]});
  }
  RealGrid i_mean(cfg.nx, cfg.ny);
  for (std::size_t k = 0; k < px; ++k)
    i_mean[k] = i_totals[k].value() / static_cast<double>(total);
  std::vector<double> s_means(n_masks);
  for (std::size_t m = 0; m < n_masks; ++m)
    s_means[m] = s_totals[m].value() / static_cast<double>(total);

  // Pass 2: cross sums per (mask, order), sharded with shared means.
  const std::size_t combos = n_masks * n_orders;
  std::vector<std::vector<CorrAccumulator>> acc_shards(static_cast<std::size_t>(shards));
  for (auto& shard : acc_shards) {
    shard.reserve(combos);
    for (std::size_t m = 0; m < n_masks; ++m)
      for (std::size_t o = 0; o < n_orders; ++o) {
        shard.emplace_back(orders[o], cfg.nx, cfg.ny);
        shard.back().freeze_means(s_means[m], i_mean, total);
      }
  }
  run_sharded([&](int j) {
    auto& accs = acc_shards[static_cast<std::size_t>(j)];
    SpeckleSynth synth(cfg);
    std::vector<double> s(n_masks);
    for (std::int64_t idx = shard_begin(j); idx < shard_begin(j + 1); ++idx) {
      const SpeckleFrame frame = synth.frame(idx);
      for (std::size_t m = 0; m < n_masks; ++m)
        s[m] = bucket_signal(frame.intensity, *masks[m], cfg.pitch);
      for (std::size_t m = 0; m < n_masks; ++m)
        for (std::size_t o = 0; o < n_orders; ++o)
          accs[m * n_orders + o].add(s[m], frame.intensity);
    }
  });

  std::vector<GhostImage> images;
  images.reserve(combos);
  for (std::size_t c = 0; c < combos; ++c) {
    CorrAccumulator master = std::move(acc_shards[0][c]);
    for (int j = 1; j < shards; ++j) master.merge_from(acc_shards[static_cast<std::size_t>(j)][c]);
    images.push_back(master.finalize());
  }
  return images;
}

}  // namespace ghost
