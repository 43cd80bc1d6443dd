#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace g2 {

// All randomness in a run flows from one root seed. Independent consumers
// (dataset generation, weight init, augmentation, ...) draw from named
// streams so that changing how one stream is consumed does not perturb the
// others. Stream seeds are derived with FNV-1a over (root seed, name) and
// optional per-step counters, so a stream at step t is a pure function of
// (seed, name, t) -- this is what makes checkpoint resume bit-exact.
inline uint64_t derive_seed(uint64_t root, std::string_view stream, uint64_t counter = 0) {
  uint64_t h = 14695981039346656037ull;
  auto mix = [&h](uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(root);
  for (char c : stream) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ull;
  }
  mix(counter);
  // splitmix64 finalizer
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

// mt19937_64 wrapper with portable uniform/normal draws (no reliance on
// libstdc++ distribution internals, so outputs are stable across toolchains).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  Rng(uint64_t root, std::string_view stream, uint64_t counter = 0)
      : engine_(derive_seed(root, stream, counter)) {}

  uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform() {
    return (engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t uniform_index(uint64_t n) {
    return static_cast<uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; one value per call, cached pair discarded for simplicity
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace g2
