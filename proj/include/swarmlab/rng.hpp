#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace swarmlab {

/// SplitMix64 finalizer. Used to expand a 64-bit seed into generator state
/// and to derive session reset seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministic seed derivation: mixes a base seed with a counter.
/// derive_seed(s, k) = splitmix64 output after setting the state to
/// s ^ (k * 0x9E3779B97F4A7C15).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter);

/// xoshiro256** 1.0, seeded by four successive SplitMix64 outputs of the
/// 64-bit seed. The algorithm and seeding are fixed so that swarm
/// trajectories are reproducible on any platform.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double in [0, 1): the top 53 bits of the next output times 2^-53.
  double uniform01();

  /// Uniform double in [lo, hi): lo + uniform01() * (hi - lo).
  double uniform(double lo, double hi);

  const std::array<std::uint64_t, 4>& state() const { return s_; }
  static Rng from_state(const std::array<std::uint64_t, 4>& s);

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace swarmlab
