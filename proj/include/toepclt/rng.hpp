#pragma once

// Counter-based random numbers.
//
// Every random quantity in the library is a pure function of
// (key, counter): the key is derived from a master seed and a list of
// stream identifiers, and the counter indexes the draw inside the stream.
// The generator is SplitMix64 evaluated in counter mode, so the k-th draw of
// a stream never depends on how many other draws were taken before it, and
// results are identical across thread counts and call orders.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <utility>

namespace toepclt {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer (Stafford variant 13).
[[nodiscard]] inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives a child key from a parent key and one stream identifier.
[[nodiscard]] inline constexpr std::uint64_t derive_key(std::uint64_t parent,
                                                        std::uint64_t id) noexcept {
  return mix64(parent ^ mix64(id + kGoldenGamma));
}

[[nodiscard]] inline constexpr std::uint64_t derive_key(
    std::uint64_t parent, std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t k = mix64(parent);
  for (auto id : ids) k = derive_key(k, id);
  return k;
}

/// One stream of a counter-based generator.
class CounterStream {
 public:
  constexpr CounterStream() noexcept = default;
  explicit constexpr CounterStream(std::uint64_t key) noexcept : key_(key) {}

  [[nodiscard]] constexpr std::uint64_t key() const noexcept { return key_; }

  [[nodiscard]] constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix64(key_ + (counter + 1) * kGoldenGamma);
  }

  /// Uniform on [0, 1) with 53 random bits.
  [[nodiscard]] constexpr double uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller from counters 2c and 2c+1.
  [[nodiscard]] double normal(std::uint64_t counter) const noexcept {
    const double u1 = 1.0 - uniform(2 * counter);  // (0, 1]
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_ = 0;
};

/// Sequential view over a CounterStream, for hot loops that consume draws in order.
class SequentialStream {
 public:
  explicit constexpr SequentialStream(std::uint64_t key) noexcept : state_(key) {}

  constexpr std::uint64_t next_bits() noexcept {
    state_ += kGoldenGamma;
    return mix64(state_);
  }
  constexpr double next_uniform() noexcept {
    return static_cast<double>(next_bits() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

}  // namespace toepclt
