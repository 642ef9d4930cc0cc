#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mgn {

// Deterministic random source. std::mt19937_64 has a standard-mandated
// sequence, but the standard distributions do not, so the conversions to
// uniform/normal/bernoulli are done by hand here. Identical seeds give
// identical streams on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), gen_(mix(seed)) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Unbiased index in [0, n) (Lemire's multiply-shift with rejection).
  uint64_t index(uint64_t n) {
    if (n <= 1) return 0;
    while (true) {
      uint64_t x = gen_();
      __uint128_t m = static_cast<__uint128_t>(x) * n;
      uint64_t lo = static_cast<uint64_t>(m);
      if (lo >= n || lo >= static_cast<uint64_t>(-static_cast<int64_t>(n)) % n)
        return static_cast<uint64_t>(m >> 64);
    }
  }

  /// Independent child stream; (seed, stream_id) fully determines it, so
  /// derived streams may be consumed in any order or in parallel.
  Rng derive(uint64_t stream_id) const {
    return Rng(mix(seed_ ^ mix(stream_id + 0x9E3779B97F4A7C15ull)));
  }

 private:
  // splitmix64 finalizer; spreads low-entropy seeds before feeding mt19937_64.
  static uint64_t mix(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  uint64_t seed_;
  std::mt19937_64 gen_;
};

/// Fisher-Yates shuffle driven by Rng (std::shuffle is not portable
/// bit-for-bit across standard libraries).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.index(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace mgn
