#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dio {

/// Seeded PRNG with portable uniform and Box-Muller normal draws.
///
/// The distributions are written out here rather than taken from <random>
/// so that sequences do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), unbiased.
  std::size_t uniform_index(std::size_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  std::vector<std::size_t> permutation(std::size_t n);

  /// Independent child stream, e.g. one per head or per shard.
  Rng fork(std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer; mixes seeds for derived streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dio
