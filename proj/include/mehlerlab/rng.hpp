#pragma once

#include <cmath>
#include <cstdint>

#include "mehlerlab/types.hpp"

namespace mehlerlab {

/// SplitMix64 step; used to expand seeds and to derive independent streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based stream derivation: the same (master, stream) pair always
/// yields the same seed, independent of how many other streams exist.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

/// FNV-1a, used to give checks stable per-name seed streams.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// xoshiro256** seeded via SplitMix64. Self-contained so that sequences are
/// identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
    have_cached_normal_ = false;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0,1]; safe as a log argument.
  double uniform01_open() { return 1.0 - uniform01(); }

  /// Standard normal via Box-Muller (second value cached).
  double normal() {
    if (have_cached_normal_) {
      have_cached_normal_ = false;
      return cached_normal_;
    }
    const double u1 = uniform01_open();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(th);
    have_cached_normal_ = true;
    return r * std::cos(th);
  }

  Vec normal_vec(int d) {
    Vec z(d);
    for (int i = 0; i < d; ++i) z(i) = normal();
    return z;
  }

  /// Exact Poisson sampling by summing exponential interarrival times.
  long poisson(double lambda) {
    if (lambda < 0.0 || !std::isfinite(lambda)) throw DomainError("poisson: bad rate");
    if (lambda == 0.0) return 0;
    long k = 0;
    double acc = -std::log(uniform01_open());
    while (acc <= lambda) {
      ++k;
      acc += -std::log(uniform01_open());
    }
    return k;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
  double cached_normal_ = 0.0;
  bool have_cached_normal_;
};

}  // namespace mehlerlab
