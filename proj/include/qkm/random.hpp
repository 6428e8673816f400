#pragma once

#include <cstdint>
#include <random>

namespace qkm {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for a (base seed, purpose, index) triple.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ splitmix64(stream)) + index);
}

// Stream tags for derive_seed.
namespace stream {
inline constexpr std::uint64_t kJl = 1;
inline constexpr std::uint64_t kAnn = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kFrame = 4;
inline constexpr std::uint64_t kSubsample = 5;
inline constexpr std::uint64_t kRun = 6;
}  // namespace stream

}  // namespace qkm
