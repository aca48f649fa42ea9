#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace densift {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Replication-keyed stream: the state depends only on (seed, stream, substream),
// never on which thread draws from it or in which order replications run.
// Variates are produced with explicit transforms (no std::*_distribution) so a
// given key always yields the same sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0)
      : gen_(splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ ~substream)) {}

  std::uint64_t bits() { return gen_(); }

  // uniform on (0, 1]
  double uniform01() {
    return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller; the second variate of each pair is discarded so the draw
  // sequence is a pure function of the call count.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  int bernoulli(double p) { return uniform01() <= p ? 1 : 0; }

  // Fisher-Yates shuffle of [0, n)
  template <typename Int>
  std::vector<Int> permutation(Int n) {
    std::vector<Int> idx(n);
    for (Int i = 0; i < n; ++i) idx[i] = i;
    for (Int i = n; i > 1; --i) {
      Int j = static_cast<Int>(gen_() % static_cast<std::uint64_t>(i));
      std::swap(idx[i - 1], idx[j]);
    }
    return idx;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace densift
