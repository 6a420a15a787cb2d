// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_COMMON_RNG_H_
#define APTSEP_COMMON_RNG_H_

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace aptsep {

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based generator: draw i of a stream with key s is
// Mix64(s + (i + 1) * 0x9E3779B97F4A7C15). Child streams are keyed by
// Mix64(parent_key ^ Mix64(tag)), so every draw is addressable without
// replaying earlier ones.
class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t NextU64() { return Mix64(key_ + (++counter_) * kGamma); }

  // 53-bit uniform in [0, 1).
  double Uniform() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t Below(std::uint64_t n);

  // Standard normal (Box-Muller, one draw per pair of uniforms).
  double Normal();

  Rng Child(std::uint64_t tag) const { return Rng(Mix64(key_ ^ Mix64(tag))); }
  Rng Child(std::string_view tag) const { return Child(HashTag(tag)); }

  // FNV-1a 64 of the tag bytes.
  static std::uint64_t HashTag(std::string_view tag);

  // Fisher-Yates permutation of 0..n-1 (swaps from the back).
  std::vector<std::size_t> Permutation(std::size_t n);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace aptsep

#endif  // APTSEP_COMMON_RNG_H_
