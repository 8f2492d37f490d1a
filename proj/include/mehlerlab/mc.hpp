#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "mehlerlab/rng.hpp"
#include "mehlerlab/types.hpp"

namespace mehlerlab {

/// Monte Carlo estimate: sample count, mean, and 95% normal half-width.
struct McEstimate {
  std::int64_t n = 0;
  double mean = 0.0;
  double half_width = 0.0;

  double std_error() const { return half_width / 1.959963984540054; }
};

/// Plain running moments; merges by sufficient statistics.
struct RunningStats {
  std::int64_t n = 0;
  double sum = 0.0;
  double sumsq = 0.0;

  void add(double x) {
    ++n;
    sum += x;
    sumsq += x * x;
  }
  void merge(const RunningStats& o) {
    n += o.n;
    sum += o.sum;
    sumsq += o.sumsq;
  }
  double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
  double variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    double v = (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
    return v > 0.0 ? v : 0.0;
  }
  double std_error() const { return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
  McEstimate estimate() const { return {n, mean(), 1.959963984540054 * std_error()}; }
};

/// Moments of weighted samples (w_j, f_j); supports the /n weighted mean,
/// its delta-method half-width, and the effective sample size.
struct WeightedStats {
  std::int64_t n = 0;
  double sum_w = 0.0;
  double sum_wf = 0.0;
  double sum_wwff = 0.0;  // (w f)^2
  double sum_ww = 0.0;

  void add(double w, double f) {
    ++n;
    sum_w += w;
    sum_wf += w * f;
    sum_wwff += w * f * w * f;
    sum_ww += w * w;
  }
  void merge(const WeightedStats& o) {
    n += o.n;
    sum_w += o.sum_w;
    sum_wf += o.sum_wf;
    sum_wwff += o.sum_wwff;
    sum_ww += o.sum_ww;
  }
  /// Mean of w*f over n (the weights average to 1 in expectation).
  McEstimate estimate() const {
    if (n == 0) return {};
    const double m = sum_wf / static_cast<double>(n);
    double var = 0.0;
    if (n > 1) {
      var = (sum_wwff - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
      if (var < 0.0) var = 0.0;
    }
    return {n, m, 1.959963984540054 * std::sqrt(var / static_cast<double>(n))};
  }
  double effective_sample_size() const {
    if (n == 0 || sum_ww <= 0.0) return 0.0;
    const double wbar = sum_w / static_cast<double>(n);
    const double w2bar = sum_ww / static_cast<double>(n);
    const double cv2 = w2bar / (wbar * wbar) - 1.0;
    return static_cast<double>(n) / (1.0 + (cv2 > 0.0 ? cv2 : 0.0));
  }
};

/// Worker cap: MEHLERLAB_THREADS, else hardware concurrency, at most 16.
inline int worker_count() {
  if (const char* env = std::getenv("MEHLERLAB_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  if (hc == 0) hc = 1;
  return static_cast<int>(hc > 16 ? 16 : hc);
}

/// Runs `body(count, rng, acc)` over fixed-size chunks with per-chunk RNG
/// streams split off `seed`. The chunk layout and merge order are fixed, so
/// the result does not depend on the number of worker threads.
template <class Accum>
Accum mc_chunked(std::int64_t n, std::uint64_t seed,
                 const std::function<void(std::int64_t, Rng&, Accum&)>& body) {
  constexpr std::int64_t kChunk = 8192;
  const std::int64_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<Accum> results(static_cast<std::size_t>(chunks));

  const int workers = static_cast<int>(std::min<std::int64_t>(worker_count(), chunks));
  std::atomic<std::int64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&]() {
    for (;;) {
      if (failed.load()) break;
      const std::int64_t c = next.fetch_add(1);
      if (c >= chunks) break;
      const std::int64_t count = std::min(kChunk, n - c * kChunk);
      Rng rng(split_seed(seed, static_cast<std::uint64_t>(c)));
      try {
        body(count, rng, results[static_cast<std::size_t>(c)]);
      } catch (...) {
        std::lock_guard<std::mutex> guard(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        break;
      }
    }
  };

  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  Accum total;
  for (const auto& r : results) total.merge(r);
  return total;
}

}  // namespace mehlerlab
