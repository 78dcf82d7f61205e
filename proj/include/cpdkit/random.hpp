#pragma once

#include <cstdint>
#include <random>

#include "cpdkit/tensor.hpp"

namespace cpdkit {

/// Seeded generator with platform-independent draws.
///
/// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniforms take the top 53 bits; normals use the Box-Muller
/// transform written out here, since the standard distributions are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1).
  double uniform();
  /// Standard normal N(0, 1). Consumes two uniforms.
  double normal();
  /// Circular complex normal with E|z|^2 = 1: real and imaginary parts are
  /// independent N(0, 1/2). Consumes two uniforms.
  cplx complex_normal();

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 mix of (seed, stream), used to give independent sub-streams
/// (noise, synthetic sources, ...) to a single user seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace cpdkit
