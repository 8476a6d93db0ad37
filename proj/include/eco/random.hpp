#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace eco {

/// Coordinates of one random draw. Draws are a pure function of all four
/// fields, so two runs that agree on the key schedule consume identical
/// randomness regardless of evaluation order.
struct RngKey {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint64_t tensor_id = 0;
  std::uint64_t index = 0;

  RngKey with_index(std::uint64_t i) const noexcept { return {seed, step, tensor_id, i}; }
  RngKey with_step(std::uint64_t s) const noexcept { return {seed, s, tensor_id, index}; }

  bool operator==(const RngKey&) const = default;
};

namespace detail {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// 64 random bits for `key`. Each field is absorbed through a full SplitMix64
/// round so that neighbouring counters land on unrelated outputs.
constexpr std::uint64_t keyed_bits(const RngKey& key) noexcept {
  using detail::kGolden;
  using detail::mix64;
  std::uint64_t h = mix64(key.seed + kGolden);
  h = mix64(h ^ (key.step + 2 * kGolden));
  h = mix64(h ^ (key.tensor_id + 3 * kGolden));
  h = mix64(h ^ (key.index + 4 * kGolden));
  return h;
}

/// Uniform double in [0, 1) with 53 random mantissa bits.
constexpr double keyed_uniform(const RngKey& key) noexcept {
  return static_cast<double>(keyed_bits(key) >> 11) * 0x1.0p-53;
}

/// Standard normal draw for `key` (Box-Muller on two decorrelated uniforms).
inline double keyed_normal(const RngKey& key) noexcept {
  const double u1 = 1.0 - keyed_uniform(key);  // (0, 1]
  const double u2 = keyed_uniform(RngKey{key.seed ^ 0xd1b54a32d192ed03ULL, key.step, key.tensor_id, key.index});
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace eco
