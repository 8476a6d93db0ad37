#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "eco/tensor.hpp"

namespace eco::theory {

/// theta = theta^ - (eta beta / (1 - beta)) m^
inline Tensor virtual_point(const Tensor& theta_hat, const Tensor& m_hat, double eta, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("virtual_point: beta must lie in (0, 1)");
  require_same_shape(theta_hat, m_hat, "virtual_point");
  const double C = eta * beta / (1.0 - beta);
  Tensor out = theta_hat;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= C * m_hat[i];
  return out;
}

struct VirtualResidual {
  double max_inf = 0.0;  ///< max_t |theta_{t+1} - theta_t + eta grad_t|_inf
  double max_l2 = 0.0;   ///< same, Euclidean norm
};

/// Checks that the virtual points of a trajectory move by plain gradient
/// steps. `theta_hats` and `m_hats` hold T + 1 states, `grads[t]` is the
/// gradient evaluated at theta_hats[t] for t < T.
inline VirtualResidual check_virtual_dynamics(std::span<const Tensor> theta_hats,
                                              std::span<const Tensor> m_hats,
                                              std::span<const Tensor> grads, double eta, double beta) {
  if (theta_hats.size() != m_hats.size())
    throw ShapeError("check_virtual_dynamics: theta and momentum trajectories differ in length");
  if (theta_hats.empty() || grads.size() + 1 != theta_hats.size())
    throw ShapeError("check_virtual_dynamics: need T + 1 states and T gradients");

  VirtualResidual r;
  Tensor prev = virtual_point(theta_hats[0], m_hats[0], eta, beta);
  for (std::size_t t = 0; t < grads.size(); ++t) {
    Tensor next = virtual_point(theta_hats[t + 1], m_hats[t + 1], eta, beta);
    require_same_shape(next, grads[t], "check_virtual_dynamics: gradient");
    double inf = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      const double res = next[i] - prev[i] + eta * grads[t][i];
      inf = std::max(inf, std::abs(res));
      sq += res * res;
    }
    r.max_inf = std::max(r.max_inf, inf);
    r.max_l2 = std::max(r.max_l2, std::sqrt(sq));
    prev = std::move(next);
  }
  return r;
}

}  // namespace eco::theory
