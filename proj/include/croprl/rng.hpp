#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace croprl {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Seeded random stream with portable output. std::mt19937_64 is pinned by the
// standard; the distribution transforms below are ours, so a given seed yields
// the same draws on every platform and standard library. The std::*_distribution
// adaptors are deliberately not used for that reason.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent substream: decorrelates (master, stream) pairs.
  static Rng derive(std::uint64_t master, std::uint64_t stream) {
    return Rng(splitmix64(splitmix64(master) ^ splitmix64(stream * 0xD1B54A32D192ED03ull + 1)));
  }
  static Rng derive(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return derive(splitmix64(master) ^ splitmix64(a * 0x8CB92BA72F3D8DD7ull + 0x2545F4914F6CDD1Dull), b);
  }

  std::uint64_t next_u64() { return engine_(); }

  // [0,1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0,n). Modulo bias is irrelevant for the small n used here.
  std::uint64_t uniform_int(std::uint64_t n) { return engine_() % n; }

  // Box-Muller; consumes two uniforms per draw, no cached spare.
  double standard_normal() {
    const double u1 = 1.0 - uniform();  // (0,1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * standard_normal(); }

  double exponential(double mean) { return -mean * std::log(1.0 - uniform()); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
template <typename Vec>
void shuffle_in_place(Vec& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace croprl
