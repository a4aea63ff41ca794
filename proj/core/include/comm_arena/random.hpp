#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace comm_arena {

/// Seedable random stream shared by one training run.
///
/// Wraps a 64-bit Mersenne twister and derives doubles and bounded integers
/// with fixed bit arithmetic so that trajectories are reproducible across
/// standard library implementations (the std distributions are not).
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  // Textual engine state, for resume files.
  std::string serialize() const;
  static SeedStream deserialize(const std::string& state);

  friend bool operator==(const SeedStream& a, const SeedStream& b) {
    return a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace comm_arena
