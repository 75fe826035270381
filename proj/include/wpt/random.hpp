#pragma once

#include <cstdint>
#include <random>

namespace wpt {

using Rng = std::mt19937_64;

// Independent sub-streams derived from one master seed. Environment streams
// are shared by every agent run with the same seed so that comparisons see
// identical solar, channel and user-selection randomness.
enum class Stream : std::uint64_t {
  kGeometry = 1,
  kSolar = 2,
  kChannel = 3,
  kUserSelection = 4,
  kExploration = 5,
  kPolicyInit = 6,
};

// SplitMix64 finalizer over (master, stream).
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(stream) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_stream(std::uint64_t master, Stream stream) {
  return Rng(derive_seed(master, stream));
}

// Uniform double in [0, 1) built from the top 53 bits, so results do not
// depend on the standard library's distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace wpt
