#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace csitk {

// Counter-based splittable PRNG (splitmix64). Each generator owns an
// independent stream keyed by a 64-bit seed; substreams are derived by
// hashing the parent seed with a path of integers, so generation order
// never depends on scheduling.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Standard normal via Box-Muller; the second variate is cached.
  double next_normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = next_double();
    double u2 = next_double();
    // Avoid log(0).
    while (u1 <= 0.0) u1 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  // Exponential with the given mean (inverse CDF).
  double next_exponential(double mean) {
    double u = next_double();
    while (u >= 1.0) u = next_double();
    return -mean * std::log1p(-u);
  }

  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Derive an independent substream from a base seed and an integer path,
// e.g. substream(seed, {kDatasetStream, cell, ue, scenario}).
inline SplitMix64 substream(uint64_t seed, std::initializer_list<uint64_t> path) {
  uint64_t key = seed;
  for (uint64_t p : path) key = SplitMix64::mix(key, p);
  return SplitMix64(key);
}

// Stream-kind tags, kept distinct so unrelated substreams never collide.
enum StreamTag : uint64_t {
  kDatasetStream = 0x11,
  kMaskStream = 0x22,
  kShuffleStream = 0x33,
  kInitStream = 0x44,
  kSplitStream = 0x55,
  kExperimentStream = 0x66,
};

}  // namespace csitk
