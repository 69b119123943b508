#pragma once

#include <cstdint>
#include <random>

namespace qndsim {

using Engine = std::mt19937_64;

/// Pipeline stages that own independent random streams within a shot.
enum class Stage : std::uint32_t {
  sampling = 1,
  projection = 2,
  probe_m1 = 3,
  evolution = 4,
  probe_m2 = 5,
  imaging = 6,
  bootstrap = 7,
  synthetic = 8,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of the stream keyed by (seed, shot, stage, sub). Streams with any
/// differing key component are decorrelated by the mixing chain, so shots can
/// run in any order or in parallel and still reproduce bitwise.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t shot, Stage stage,
                                    std::uint64_t sub = 0) noexcept {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ shot);
  h = mix64(h ^ static_cast<std::uint64_t>(stage));
  return mix64(h ^ sub);
}

inline Engine make_stream(std::uint64_t seed, std::uint64_t shot, Stage stage,
                          std::uint64_t sub = 0) {
  return Engine{stream_seed(seed, shot, stage, sub)};
}

}  // namespace qndsim
