#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

// Deterministic random-number plumbing shared by every stochastic component.
//
// All randomness flows through std::mt19937_64 so that a given seed produces
// the same stream on every platform.  Independent streams (network rotation,
// initial conditions, baseline panels, ...) are derived from a single base
// seed with a SplitMix64-style mixer rather than by ad-hoc offsets, which
// keeps streams statistically unrelated even for adjacent seeds.

namespace cmfactor::rng {

using Engine = std::mt19937_64;

// SplitMix64 finalizer.  Bijective on 64-bit words, good avalanche behaviour.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed and a component path,
// e.g. derive_seed(base, {k_sim_stream, rep}).  Different paths give
// decorrelated streams; the same path always gives the same seed.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t state = mix64(base);
  for (std::uint64_t part : path) {
    state = mix64(state ^ mix64(part + 0x632be59bd9b4e019ULL));
  }
  return state;
}

// Uniform draw strictly inside (0, 1): take the top 53 bits and centre the
// lattice so neither endpoint is representable in the output.
inline double uniform_open(Engine& engine) {
  return (static_cast<double>(engine() >> 11) + 0.5) * 0x1p-53;
}

// Standard normal via Box-Muller.  Draws a fresh pair of uniforms per call
// and discards the second variate; callers here need at most a few thousand
// normals at a time, so simplicity wins over caching.
inline double standard_normal(Engine& engine) {
  const double u1 = (static_cast<double>(engine() >> 11) + 1.0) * 0x1p-53;  // (0, 1]
  const double u2 = uniform_open(engine);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace cmfactor::rng
