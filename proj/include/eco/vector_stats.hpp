#pragma once

#include <algorithm>

#include "eco/tensor.hpp"

namespace eco {

/// <a,b> / (|a| |b|), clamped to [-1, 1] against rounding.
inline double cosine_similarity(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "cosine_similarity");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine_similarity: zero-norm input");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

/// |a| / |b|
inline double relative_norm(const Tensor& a, const Tensor& b) {
  const double nb = norm(b);
  if (nb == 0.0) throw DomainError("relative_norm: denominator has zero norm");
  return norm(a) / nb;
}

}  // namespace eco
