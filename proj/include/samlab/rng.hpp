#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace samlab {

// Independent random streams. The numeric ids are part of the reproducibility
// contract: changing one changes every stream derived from it.
enum class Stream : std::uint64_t {
  Init = 1,
  Data = 2,
  Shuffle = 3,
  Sample = 4,
  Power = 5,
  Brownian = 6,
  Probe = 7,
  Noise = 8,
  Trace = 9,
};

std::uint64_t splitmix64(std::uint64_t x);

// Derives a 64-bit key from (seed, stream, step):
//   k = splitmix64(splitmix64(splitmix64(seed) ^ stream * 0x9E3779B97F4A7C15)
//                  ^ step * 0xC2B2AE3D27D4EB4F)
std::uint64_t stream_key(std::uint64_t seed, Stream stream, std::uint64_t step);

// Platform-independent generator: a std::mt19937_64 engine (whose output
// sequence is fixed by the standard) seeded with stream_key(). Uniforms use the
// top 53 bits; normals use Box-Muller with the second value cached. No
// std::*_distribution is used because their outputs are implementation-defined.
class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream, std::uint64_t step = 0);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }
  // Uniform integer in [0, n), unbiased by rejection.
  std::size_t below(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace samlab
