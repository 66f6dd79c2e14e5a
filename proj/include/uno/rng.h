// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef UNO_RNG_H_
#define UNO_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace uno {

// Name recorded in dataset manifests so bundles can be regenerated anywhere.
inline constexpr std::string_view kRngAlgorithm =
    "mt19937_64/splitmix64-substreams/box-muller";

std::uint64_t SplitMix64(std::uint64_t x);

// Seedable generator with platform-independent output.
//
// std::mt19937_64 is bit-specified by the standard; the distributions in
// <random> are not, so uniform and normal variates are derived here.
// Substreams: Rng(seed).Substream(tag) is seeded with
// SplitMix64(seed ^ SplitMix64(fnv1a64(tag))), so streams with different
// tags are independent of each other and of draw order in the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  Rng Substream(std::string_view tag) const;
  Rng Substream(std::uint64_t index) const;

  std::uint64_t NextU64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer on [0, n); n > 0. Unbiased (rejection).
  std::uint64_t UniformInt(std::uint64_t n);

  // Standard normal via Box-Muller; the second variate is cached.
  double Normal();
  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace uno

#endif  // UNO_RNG_H_
