#pragma once

#include <cstdint>
#include <string_view>

namespace motionmidi {

/// FNV-1a 64-bit hash; used to derive RNG streams and config hashes.
std::uint64_t fnv1a64(std::string_view bytes);

/// Deterministic splittable PRNG built on SplitMix64 (Steele et al. output
/// mixing, golden-ratio increment). Every source of randomness in the
/// project derives a named stream from one master seed via split(), so runs
/// are bit-reproducible and the draw order of one component cannot disturb
/// another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double next_unit();

  /// Uniform in [lo, hi).
  double next_range(double lo, double hi);

  /// Uniform integer in [lo, hi] inclusive. Uses rejection sampling so the
  /// distribution is exact.
  std::int64_t next_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller; caches the spare value.
  double next_gaussian();

  /// Independent child stream; deterministic function of (state, stream id).
  Rng split(std::uint64_t stream) const;
  Rng split(std::string_view label) const;

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace motionmidi
