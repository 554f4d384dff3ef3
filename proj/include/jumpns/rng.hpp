#pragma once

// Seeded random streams.
//
// Every sampler takes an explicit 64-bit seed. Independent streams for an
// ensemble are derived as stream_seed(master, index), a SplitMix64 mix of the
// pair, and each stream drives its own std::mt19937_64. Given the same
// standard library, results are bit-reproducible and independent of thread
// count or evaluation order.

#include <cstdint>
#include <random>

namespace jumpns {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of stream `index` under `master`.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Uniform on (0, 1].
  double uniform_open0() { return 1.0 - canonical(); }
  /// Uniform on [0, 1).
  double canonical() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double normal() { return normal_(engine_); }
  std::uint64_t poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    std::poisson_distribution<std::uint64_t> d(mean);
    return d(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace jumpns
