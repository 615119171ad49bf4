#pragma once

#include <cstdint>
#include <string_view>

namespace nslang {

/// Counter-based generator: output k of stream (seed, stream) is
/// splitmix64_mix(key + k * golden), key = mix(mix(seed) ^ stream-tag).
/// Every value depends only on (seed, stream, k), so a trial's random
/// numbers do not depend on which worker produces it.
class CounterRng {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-ctr";

  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal by the Box-Muller transform (second value cached).
  double normal();
  /// Exp(1) as -log(1 - u).
  double exponential();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

}  // namespace nslang
