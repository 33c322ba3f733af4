#pragma once

#include <cmath>
#include <cstdint>

namespace una::rng {

// Counter-based generator built on the splitmix64 finalizer. Every draw is a
// pure function of (seed, stream, counter), so results are bit-reproducible
// regardless of call order, thread count, or platform. Streams separate
// independent uses of the same seed (init, shuffling, sampling, ...).

inline constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ull;

inline uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

inline uint64_t at(uint64_t seed, uint64_t stream, uint64_t counter) {
  uint64_t s = mix64(seed + kGamma * (stream + 1));
  return mix64(s + kGamma * (counter + 1));
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform(uint64_t seed, uint64_t stream, uint64_t counter) {
  return static_cast<double>(at(seed, stream, counter) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; consumes counters 2c and 2c+1.
inline double normal(uint64_t seed, uint64_t stream, uint64_t counter) {
  double u1 = uniform(seed, stream, 2 * counter);
  double u2 = uniform(seed, stream, 2 * counter + 1);
  double r = std::sqrt(-2.0 * std::log1p(-u1));  // u1 in [0,1) keeps the log finite
  return r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Stream ids used across the library. Callers may use any other values.
inline constexpr uint64_t kStreamInit = 1;
inline constexpr uint64_t kStreamShuffle = 2;
inline constexpr uint64_t kStreamSample = 3;
inline constexpr uint64_t kStreamPromptPick = 4;
inline constexpr uint64_t kStreamData = 5;

}  // namespace una::rng
