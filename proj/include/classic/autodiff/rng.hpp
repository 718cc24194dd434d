#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace classic {

/// Seeded pseudo-random source. The engine is std::mt19937_64, whose output
/// sequence the standard fixes; the mapping to doubles, integers and normals
/// is done here rather than through <random> distributions (whose algorithms
/// are implementation-defined) so draws match across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n), unbiased.
  std::uint64_t index(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

  /// Independent child stream; `stream` distinguishes siblings.
  Rng fork(std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finaliser; used to derive seeds from (seed, salt) pairs.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace classic
