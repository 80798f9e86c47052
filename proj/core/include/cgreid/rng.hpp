#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace cgreid {

// Hand-rolled SplitMix64 generator. Seeded runs must be reproducible
// bit-for-bit across standard library implementations, which rules out
// std::uniform_real_distribution and friends.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without spare caching; two draws per sample keeps the
  // stream position a pure function of the call count.
  double normal(double mean = 0.0, double sigma = 1.0);

  // Uniform integer in [0, n). Modulo bias is irrelevant at the scales
  // used here (n << 2^64).
  int uniform_int(int n) { return n > 0 ? static_cast<int>(next_u64() % static_cast<uint64_t>(n)) : 0; }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_u64() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

// Mixes a root seed with a tag path into an independent stream seed.
uint64_t derive_seed(uint64_t root, std::initializer_list<uint64_t> tags);

// Tag constants for the seed streams used across the project. Values are
// arbitrary but fixed; changing them changes every seeded run.
namespace seed_tag {
inline constexpr uint64_t backbone = 11;
inline constexpr uint64_t head = 12;
inline constexpr uint64_t sampler = 21;
inline constexpr uint64_t augment = 22;
inline constexpr uint64_t identity = 31;
inline constexpr uint64_t image = 32;
inline constexpr uint64_t corruption = 33;
inline constexpr uint64_t data = 34;
}  // namespace seed_tag

}  // namespace cgreid
