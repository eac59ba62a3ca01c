#pragma once

// Deterministic random streams.
//
// Every random draw in the library comes from a std::mt19937_64 seeded with a
// value derived from (base seed, tags...). Uniform and normal transforms are
// implemented here rather than through <random> distributions so that the
// sequence is the same on every standard library and no distribution object
// carries hidden state between draws.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace zoc {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stream purposes, mixed into derived seeds so that streams never collide.
enum class Stream : std::uint64_t {
  kTrial = 1,
  kGradient = 2,
  kInit = 3,
  kOutputIndex = 4,
  kBaseline = 5,
  kReferenceTable = 6,
  kGraph = 7,
  kData = 8,
  kPhase = 9,
};

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t + 0x632BE59BD9B4E019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  return Rng(derive_seed(base, tags));
}

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

/// Standard normal draw (Marsaglia polar method, second variate discarded).
inline double standard_normal(Rng& rng) {
  double u, v, s;
  do {
    u = 2.0 * uniform01(rng) - 1.0;
    v = 2.0 * uniform01(rng) - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

}  // namespace zoc
