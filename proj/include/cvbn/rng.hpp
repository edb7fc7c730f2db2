#pragma once

// Seeded random streams. The engine is std::mt19937_64 (its output sequence is
// fixed by the C++ standard) and every distribution below is written out by
// hand, so a stream can be reproduced bit-for-bit in any language:
//
//   uniform()          = (next() >> 11) * 2^-53                  in [0, 1)
//   normal(mu, sd)     = mu + sd * sqrt(-2 ln(1 - u1)) * cos(2 pi u2)
//   exponential(mean)  = -mean * ln(1 - u)
//
// Substreams: derive_seed(master, tag, index) chains SplitMix64 finalizers,
//   s = mix(master ^ mix(tag));  s = mix(s ^ mix(index + 1)).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string_view>

namespace cvbn {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a, used to turn stream names into tags.
inline constexpr std::uint64_t stream_tag(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                           std::uint64_t index) {
  std::uint64_t s = splitmix64(master ^ splitmix64(tag));
  return splitmix64(s ^ splitmix64(index + 1));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform on the half-open band (lo, hi].
  double uniform_open_closed(double lo, double hi) { return lo + (hi - lo) * (1.0 - uniform()); }

  double normal(double mean, double sd) {
    const double u1 = uniform();
    const double u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(1.0 - u1)) *
                      std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential(double mean) { return -mean * std::log(1.0 - uniform()); }

  /// Index drawn from (unnormalized) weights.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double x = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (x < weights[i]) return i;
      x -= weights[i];
    }
    for (std::size_t i = weights.size(); i-- > 0;)
      if (weights[i] > 0.0) return i;
    return 0;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cvbn
