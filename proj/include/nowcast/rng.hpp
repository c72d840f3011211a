#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace nowcast::rng {

/// SplitMix64 step; used for seeding and for deriving per-stream sub-seeds.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic sub-seed for stream `index` of a master seed. Streams are
/// pairwise independent for practical purposes, so repetitions, experiments
/// and trees can run in parallel and still be reproducible.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
  uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  splitmix64(s);
  return splitmix64(s);
}

/// xoshiro256** by Blackman & Vigna. Self-contained so that draws are
/// bit-identical on every platform and standard library (std distributions
/// are implementation-defined and would break reproducibility).
class Xoshiro256ss {
 public:
  explicit Xoshiro256ss(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Unbiased uniform integer in [0, n). Lemire's method with rejection.
  uint64_t bounded(uint64_t n) {
    if (n == 0) return 0;
    uint64_t x = next_u64();
    __uint128_t m = __uint128_t(x) * __uint128_t(n);
    auto l = uint64_t(m);
    if (l < n) {
      const uint64_t t = (0 - n) % n;
      while (l < t) {
        x = next_u64();
        m = __uint128_t(x) * __uint128_t(n);
        l = uint64_t(m);
      }
    }
    return uint64_t(m >> 64);
  }

  /// Standard normal via Box-Muller (stateless across calls: two uniforms per
  /// draw, cache-free so the draw sequence is a pure function of the seed).
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Fisher-Yates shuffle using bounded().
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = size_t(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t state_[4];
};

}  // namespace nowcast::rng
