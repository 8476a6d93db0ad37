#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <type_traits>
#include <variant>

#include "eco/fp8.hpp"
#include "eco/random.hpp"
#include "eco/tensor.hpp"

namespace eco {

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Pass-through: q(x) = x.
struct Identity {
  bool operator==(const Identity&) const = default;
};

/// Dynamic symmetric scaling: s = max|x| / rho, grid s * Z.
struct UniformMax {
  double rho = 1.0;
  bool operator==(const UniformMax&) const = default;
};

/// Static grid delta * Z. Used wherever the analysis assumes a fixed scale.
struct FixedStep {
  double delta = 1.0;
  bool operator==(const FixedStep&) const = default;
};

/// FP8 E4M3 values scaled by s = max|x| / 448.
struct Fp8E4M3 {
  bool operator==(const Fp8E4M3&) const = default;
};

/// Signed integers -(2^(bits-1) - 1) .. 2^(bits-1) - 1 scaled by s = max|x| / that bound.
struct IntSymmetric {
  unsigned bits = 8;
  double rho() const { return std::ldexp(1.0, static_cast<int>(bits) - 1) - 1.0; }
  bool operator==(const IntSymmetric&) const = default;
};

/// Abstract additive dither q(x) = x + xi, xi ~ U[-delta/2, delta/2].
/// Its variance is delta^2 / 12; rounding mode is ignored.
struct NoiseModel {
  double delta = 1.0;
  bool operator==(const NoiseModel&) const = default;
};

using QuantGrid = std::variant<Identity, UniformMax, FixedStep, Fp8E4M3, IntSymmetric, NoiseModel>;

enum class Rounding { RTN, SR };
enum class Granularity { TensorWise, RowWise };

struct QuantSpec {
  QuantGrid grid = Identity{};
  Rounding rounding = Rounding::RTN;
  Granularity granularity = Granularity::TensorWise;
  double zero_point = 0.0;

  bool is_identity() const { return std::holds_alternative<Identity>(grid); }

  void validate() const {
    std::visit(
        [](const auto& g) {
          using G = std::decay_t<decltype(g)>;
          if constexpr (std::is_same_v<G, UniformMax>) {
            if (!(g.rho > 0.0) || !std::isfinite(g.rho))
              throw DomainError("UniformMax: rho must be positive");
          } else if constexpr (std::is_same_v<G, FixedStep> || std::is_same_v<G, NoiseModel>) {
            if (!(g.delta > 0.0) || !std::isfinite(g.delta))
              throw DomainError("grid delta must be positive");
          } else if constexpr (std::is_same_v<G, IntSymmetric>) {
            if (g.bits < 2 || g.bits > 52) throw DomainError("IntSymmetric: bits must be in [2, 52]");
          }
        },
        grid);
    if (!std::isfinite(zero_point)) throw DomainError("zero_point must be finite");
  }

  bool operator==(const QuantSpec&) const = default;
};

inline QuantSpec identity_spec() { return {}; }

inline QuantSpec fixed_step_spec(double delta, Rounding rounding = Rounding::RTN) {
  return {FixedStep{delta}, rounding, Granularity::TensorWise, 0.0};
}

struct QuantOutcome {
  Tensor quantized;
  Tensor error;  ///< input - quantized
  Tensor scale;  ///< one entry per granularity group
};

// ---------------------------------------------------------------------------
// Rounding primitives
// ---------------------------------------------------------------------------

/// Nearest integer, ties to even. Independent of the floating-point
/// environment's rounding mode.
inline double round_half_even(double y) {
  const double r = std::round(y);  // ties away from zero
  if (std::abs(y - std::trunc(y)) == 0.5) return 2.0 * std::round(y / 2.0);
  return r;
}

/// Stochastic rounding: floor(y) + 1 with probability frac(y). Returns an
/// integral value; E_u[round_sr(y, u)] = y for u ~ U[0, 1).
inline double round_sr(double y, double u) {
  const double lo = std::floor(y);
  return lo + (u < (y - lo) ? 1.0 : 0.0);
}

// ---------------------------------------------------------------------------
// Scales
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t group_count(const Tensor& x, Granularity g) {
  return g == Granularity::TensorWise ? 1 : x.rows();
}

inline std::size_t group_length(const Tensor& x, Granularity g) {
  return g == Granularity::TensorWise ? x.size() : x.row_length();
}

inline Shape scale_shape(const Tensor& x, Granularity g) {
  return Shape{group_count(x, g)};
}

}  // namespace detail

/// Per-group s = max|x| / rho. An all-zero group gets the sentinel s = 0.
inline Tensor compute_scale(const Tensor& x, double rho, Granularity granularity,
                            double zero_point = 0.0) {
  if (!(rho > 0.0)) throw DomainError("compute_scale: rho must be positive");
  require_finite(x, "compute_scale");
  const std::size_t groups = detail::group_count(x, granularity);
  const std::size_t len = detail::group_length(x, granularity);
  Tensor scale(detail::scale_shape(x, granularity));
  for (std::size_t g = 0; g < groups; ++g) {
    double m = 0.0;
    for (std::size_t i = g * len; i < (g + 1) * len; ++i)
      m = std::max(m, std::abs(x[i] - zero_point));
    scale[g] = m / rho;
  }
  return scale;
}

// ---------------------------------------------------------------------------
// Quantizer
// ---------------------------------------------------------------------------

namespace detail {

// Rounds y on the integer lattice. On-lattice inputs (up to the final
// multiply) are returned unchanged so that SR is idempotent on grid points.
inline double round_lattice(double x, double y, double s, double z, Rounding mode, double u) {
  const double nearest = round_half_even(y);
  if (s * nearest + z == x) return nearest;
  return mode == Rounding::RTN ? nearest : round_sr(y, u);
}

inline double lattice_rho(const QuantGrid& grid) {
  if (const auto* g = std::get_if<UniformMax>(&grid)) return g->rho;
  if (const auto* g = std::get_if<IntSymmetric>(&grid)) return g->rho();
  return fp8::kE4M3Max;
}

}  // namespace detail

/// q(x) under `spec`. Stochastic draws for element i use key_base.with_index(i).
inline QuantOutcome quantize(const Tensor& x, const QuantSpec& spec, const RngKey& key_base) {
  spec.validate();
  require_finite(x, "quantize");

  const Granularity gran = spec.granularity;
  const std::size_t groups = detail::group_count(x, gran);
  const std::size_t len = detail::group_length(x, gran);
  const double z = spec.zero_point;

  QuantOutcome out{x, Tensor::zeros_like(x), Tensor(detail::scale_shape(x, gran))};
  auto uniform = [&](std::size_t i) { return keyed_uniform(key_base.with_index(i)); };

  std::visit(
      [&](const auto& grid) {
        using G = std::decay_t<decltype(grid)>;
        if constexpr (std::is_same_v<G, Identity>) {
          for (std::size_t g = 0; g < groups; ++g) out.scale[g] = 1.0;
        } else if constexpr (std::is_same_v<G, NoiseModel>) {
          for (std::size_t g = 0; g < groups; ++g) out.scale[g] = grid.delta;
          for (std::size_t i = 0; i < x.size(); ++i)
            out.quantized[i] = x[i] + (uniform(i) - 0.5) * grid.delta;
        } else if constexpr (std::is_same_v<G, FixedStep>) {
          const double s = grid.delta;
          for (std::size_t g = 0; g < groups; ++g) out.scale[g] = s;
          for (std::size_t i = 0; i < x.size(); ++i) {
            const double y = (x[i] - z) / s;
            out.quantized[i] = s * detail::round_lattice(x[i], y, s, z, spec.rounding, uniform(i)) + z;
          }
        } else {
          const Tensor scale = compute_scale(x, detail::lattice_rho(spec.grid), gran, z);
          for (std::size_t g = 0; g < groups; ++g) {
            const double s = scale[g];
            out.scale[g] = s;
            for (std::size_t i = g * len; i < (g + 1) * len; ++i) {
              if (s == 0.0) {
                out.quantized[i] = z;
                continue;
              }
              const double y = (x[i] - z) / s;
              double r;
              if constexpr (std::is_same_v<G, Fp8E4M3>)
                r = spec.rounding == Rounding::RTN ? fp8::nearest(y) : fp8::stochastic(y, uniform(i));
              else
                r = detail::round_lattice(x[i], y, s, z, spec.rounding, uniform(i));
              out.quantized[i] = s * r + z;
            }
          }
        }
      },
      spec.grid);

  for (std::size_t i = 0; i < x.size(); ++i) out.error[i] = x[i] - out.quantized[i];
  return out;
}

/// Scalar E4M3 round-to-nearest-even with saturation at +-448.
inline double fp8_nearest(double x) { return fp8::nearest(x); }

}  // namespace eco
