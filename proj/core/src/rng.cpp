#include "cgreid/rng.hpp"

#include <algorithm>
#include <cmath>

namespace cgreid {

namespace {

uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

double Rng::normal(double mean, double sigma) {
  double u1 = std::max(uniform(), 0x1.0p-1022);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
}

uint64_t derive_seed(uint64_t root, std::initializer_list<uint64_t> tags) {
  uint64_t s = mix64(root + 0x9E3779B97F4A7C15ULL);
  for (uint64_t t : tags) {
    s = mix64(s ^ (t + 0x9E3779B97F4A7C15ULL + (s << 6) + (s >> 2)));
  }
  return s;
}

}  // namespace cgreid
