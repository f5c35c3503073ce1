#pragma once

#include <cstdint>

namespace invbag {

/// Stages of an experiment that draw their own random streams from the one
/// master seed.
enum class SeedStage : std::uint64_t {
  calibration = 1,
  bagging = 2,
  composition = 3,
  generation = 4,
  training = 5,
  validation = 6,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the stream labeled `tag` under `seed`.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, SeedStage stage) {
  return mix_seed(master, static_cast<std::uint64_t>(stage));
}

}  // namespace invbag
