#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace metaprior {

/// Seeded random stream. The engine is std::mt19937_64; the variate
/// transforms are implemented here rather than taken from <random> because
/// the standard distributions are implementation-defined and would make
/// results differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Derives an independent stream from a base seed and a stream label.
  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  double normal();
  /// Exponential(1), used to build Dirichlet(1, ..., 1) weights.
  double exponential();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view text);

}  // namespace metaprior
