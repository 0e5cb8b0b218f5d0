#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mtnmt {

inline uint64_t fnv1a64(std::string_view s,
                        uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Derives a per-component seed from one master seed. All randomness in the
// toolkit flows from a single --seed through this function, so components
// draw from independent, replayable streams.
inline uint64_t mix_seed(uint64_t seed, std::string_view component,
                         uint64_t index = 0) {
  uint64_t h = fnv1a64(component, seed * 0x9e3779b97f4a7c15ull + 0x243f6a8885a308d3ull);
  h ^= index + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

// Deterministic random stream. Sampling is built directly on the raw
// mt19937_64 output instead of <random> distributions, whose algorithms are
// implementation-defined; streams here are identical across toolchains.
class Rng {
 public:
  Rng() : engine_(0x5eed) {}
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t u64() { return engine_(); }

  // Unbiased integer in [0, n) by rejection.
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform_real() { return (engine_() >> 11) * 0x1.0p-53; }

  // Box-Muller without spare caching, so the stream state is exactly the
  // engine state.
  double gaussian() {
    double u1 = 1.0 - uniform_real();
    double u2 = uniform_real();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Knuth's product-of-uniforms sampler; fine for the small lambdas used by
  // span infilling.
  int poisson(double lambda) {
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform_real();
    } while (p > limit);
    return k - 1;
  }

  // Poisson conditioned on being >= 1; zero draws are resampled.
  int poisson_positive(double lambda) {
    for (;;) {
      int k = poisson(lambda);
      if (k > 0) return k;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string save_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void restore_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mtnmt
