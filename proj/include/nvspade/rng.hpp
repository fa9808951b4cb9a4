#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nvspade {

/// SplitMix64 finalizer; used to derive independent stream seeds from counters.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the stream addressed by (master, counters...). Streams with different
/// counter tuples are statistically independent and do not depend on the order in
/// which they are created, so parallel trials replay bit-identically.
inline std::uint64_t stream_seed(std::uint64_t master, std::initializer_list<std::uint64_t> counters) {
  std::uint64_t h = mix64(master);
  for (auto c : counters) h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> counters = {}) {
  return Rng(stream_seed(master, counters));
}

/// Stage tags for per-trial streams.
enum class Stage : std::uint64_t {
  Scene = 1,
  CalibrationDI = 2,
  CalibrationSpade = 3,
  SensingDI = 4,
  SensingSpade = 5,
  Optimizer = 6,
  Ykl = 7,
  Bayes = 8,
};

inline std::uint64_t tag(Stage s) { return static_cast<std::uint64_t>(s); }

}  // namespace nvspade
