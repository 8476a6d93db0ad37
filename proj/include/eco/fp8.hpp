#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "eco/tensor.hpp"

namespace eco::fp8 {

/// Largest finite E4M3 magnitude (S.1111.110).
inline constexpr double kE4M3Max = 448.0;

/// Number of finite non-negative E4M3 codes: 0x00 .. 0x7E (0x7F is NaN).
inline constexpr std::size_t kE4M3Count = 127;

/// All finite non-negative E4M3 values, indexed by bit pattern. Because the
/// encoding is monotone, the table is sorted and index parity equals mantissa
/// parity, which is what ties-to-even needs.
inline const std::array<double, kE4M3Count>& e4m3_table() {
  static const std::array<double, kE4M3Count> table = [] {
    std::array<double, kE4M3Count> t{};
    for (std::size_t code = 0; code < kE4M3Count; ++code) {
      const int exponent = static_cast<int>(code >> 3);
      const double mantissa = static_cast<double>(code & 7) / 8.0;
      t[code] = exponent == 0 ? std::ldexp(mantissa, -6)
                              : std::ldexp(1.0 + mantissa, exponent - 7);
    }
    return t;
  }();
  return table;
}

namespace detail {

// Index of the largest table entry <= a, for 0 <= a <= kE4M3Max.
inline std::size_t floor_index(double a) {
  const auto& t = e4m3_table();
  auto it = std::upper_bound(t.begin(), t.end(), a);
  return static_cast<std::size_t>(it - t.begin()) - 1;
}

inline void require_not_nan(double x) {
  if (std::isnan(x)) throw DomainError("fp8: NaN input");
}

}  // namespace detail

/// Round-to-nearest-even onto E4M3, saturating to +-448.
inline double nearest(double x) {
  detail::require_not_nan(x);
  const double a = std::abs(x);
  if (a >= kE4M3Max) return std::copysign(kE4M3Max, x);
  const auto& t = e4m3_table();
  const std::size_t lo = detail::floor_index(a);
  if (t[lo] == a) return std::copysign(a, x);
  const std::size_t hi = lo + 1;
  const double d_lo = a - t[lo];
  const double d_hi = t[hi] - a;
  std::size_t pick = d_lo < d_hi ? lo : hi;
  if (d_lo == d_hi) pick = (lo % 2 == 0) ? lo : hi;
  return std::copysign(t[pick], x);
}

/// Stochastic rounding between the two bracketing E4M3 values: rounds away
/// from the lower one with probability proportional to the distance past it.
/// `u` is a uniform draw in [0, 1).
inline double stochastic(double x, double u) {
  detail::require_not_nan(x);
  const double a = std::abs(x);
  if (a >= kE4M3Max) return std::copysign(kE4M3Max, x);
  const auto& t = e4m3_table();
  const std::size_t lo = detail::floor_index(a);
  if (t[lo] == a) return std::copysign(a, x);
  const double p_up = (a - t[lo]) / (t[lo + 1] - t[lo]);
  return std::copysign(u < p_up ? t[lo + 1] : t[lo], x);
}

}  // namespace eco::fp8
