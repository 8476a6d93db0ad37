#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "eco/quantize.hpp"
#include "eco/tensor.hpp"

namespace eco {

/// Optimizer hyperparameters. `beta1` is the SGDM momentum (or Adam's first
/// moment coefficient); `beta2` and `epsilon` are read by Adam only.
struct Hyper {
  double eta = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  std::optional<double> clip_norm;

  void validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("eta must be positive and finite");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw DomainError("beta1 must lie in the open interval (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw DomainError("beta2 must lie in the open interval (0, 1)");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw DomainError("epsilon must be >= 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
      throw DomainError("weight_decay must be >= 0");
    if (clip_norm && !(*clip_norm > 0.0)) throw DomainError("clip_norm must be positive");
  }

  bool operator==(const Hyper&) const = default;
};

/// Error injection strength alpha = (1/eta)(1 - 1/beta). Negative for beta < 1.
inline double injection_strength(double eta, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("injection_strength: beta must lie in (0, 1)");
  if (!(eta > 0.0)) throw DomainError("injection_strength: eta must be positive");
  return (1.0 / eta) * (1.0 - 1.0 / beta);
}

struct SgdmUpdate {
  Tensor theta_tilde;
  Tensor m_tilde;
};

/// m~ = beta m + (1 - beta) g;  theta~ = theta - eta m~ (- eta lambda theta).
inline SgdmUpdate sgdm_update(const Tensor& theta, const Tensor& m, const Tensor& g, const Hyper& h) {
  h.validate();
  require_same_shape(theta, m, "sgdm_update(theta, m)");
  require_same_shape(theta, g, "sgdm_update(theta, g)");
  SgdmUpdate out{theta, m};
  for (std::size_t i = 0; i < theta.size(); ++i) {
    out.m_tilde[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    out.theta_tilde[i] = theta[i] - h.eta * out.m_tilde[i] - h.eta * h.weight_decay * theta[i];
  }
  return out;
}

/// Result of quantizing an optimizer iterate and folding the error back into
/// momentum.
struct EcoQuantized {
  Tensor theta_hat;
  Tensor m_hat;
  Tensor error;  ///< theta~ - theta^
};

/// ECO for SGDM: theta^ = q(theta~), e = theta~ - theta^, m^ = m~ + alpha e.
inline EcoQuantized eco_quantize_sgdm(const Tensor& theta_tilde, const Tensor& m_tilde,
                                      const Hyper& h, const QuantSpec& spec, const RngKey& key) {
  const double alpha = injection_strength(h.eta, h.beta1);
  require_same_shape(theta_tilde, m_tilde, "eco_quantize_sgdm");
  QuantOutcome q = quantize(theta_tilde, spec, key);
  EcoQuantized out{std::move(q.quantized), m_tilde, std::move(q.error)};
  for (std::size_t i = 0; i < out.m_hat.size(); ++i) out.m_hat[i] += alpha * out.error[i];
  return out;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamUpdate {
  Tensor theta_tilde;
  Tensor m_tilde;
  Tensor v_next;
  std::uint64_t t_next = 0;
};

/// One Adam step with bias corrections at the incremented counter and
/// decoupled weight decay folded into theta~.
inline AdamUpdate adam_update(const Tensor& theta, const Tensor& m, const Tensor& v, std::uint64_t t,
                              const Tensor& g, const Hyper& h) {
  h.validate();
  require_same_shape(theta, m, "adam_update(theta, m)");
  require_same_shape(theta, v, "adam_update(theta, v)");
  require_same_shape(theta, g, "adam_update(theta, g)");
  AdamUpdate out{theta, m, v, t + 1};
  const double t_next = static_cast<double>(out.t_next);
  const double bc1 = 1.0 - std::pow(h.beta1, t_next);
  const double bc2 = 1.0 - std::pow(h.beta2, t_next);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
    out.m_tilde[i] = mi;
    out.v_next[i] = vi;
    const double denom = std::sqrt(vi / bc2) + h.epsilon;
    const double step = denom > 0.0 ? (mi / bc1) / denom : 0.0;
    out.theta_tilde[i] = theta[i] - h.eta * step - h.eta * h.weight_decay * theta[i];
  }
  return out;
}

/// ECO for Adam: the SGDM injection with eta replaced by the element-wise
/// effective step eta / ((1 - beta1^t)(sqrt(v / (1 - beta2^t)) + eps)).
inline EcoQuantized eco_quantize_adam(const Tensor& theta_tilde, const Tensor& m_tilde,
                                      const Tensor& v_next, std::uint64_t t_next, const Hyper& h,
                                      const QuantSpec& spec, const RngKey& key) {
  const double alpha = injection_strength(h.eta, h.beta1);
  if (t_next < 1) throw DomainError("eco_quantize_adam: step counter must be >= 1");
  require_same_shape(theta_tilde, m_tilde, "eco_quantize_adam(theta, m)");
  require_same_shape(theta_tilde, v_next, "eco_quantize_adam(theta, v)");
  const double t = static_cast<double>(t_next);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);

  QuantOutcome q = quantize(theta_tilde, spec, key);
  EcoQuantized out{std::move(q.quantized), m_tilde, std::move(q.error)};
  for (std::size_t i = 0; i < out.m_hat.size(); ++i) {
    const double coeff = bc1 * alpha * (std::sqrt(v_next[i] / bc2) + h.epsilon);
    out.m_hat[i] += coeff * out.error[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact injection (stores the previous residual; reproduces master weights)
// ---------------------------------------------------------------------------

struct ExactInjectionState {
  Tensor theta_hat;
  Tensor m;
  Tensor error;
};

/// theta^_0 = q(theta_0), e_0 = theta_0 - theta^_0, m_0 <- m_0 - e_0 / (eta beta).
inline ExactInjectionState exact_injection_init(const Tensor& theta0, const Tensor& m0, const Hyper& h,
                                                const QuantSpec& spec, const RngKey& key) {
  injection_strength(h.eta, h.beta1);
  require_same_shape(theta0, m0, "exact_injection_init");
  QuantOutcome q = quantize(theta0, spec, key);
  ExactInjectionState out{std::move(q.quantized), m0, std::move(q.error)};
  const double k = 1.0 / (h.eta * h.beta1);
  for (std::size_t i = 0; i < out.m.size(); ++i) out.m[i] -= k * out.error[i];
  return out;
}

/// One step of SGDM with ideal injection m <- m_bar + e_t / eta - e_{t+1} / (eta beta).
inline ExactInjectionState exact_injection_sgdm_step(const Tensor& theta_hat, const Tensor& m_im,
                                                     const Tensor& prev_error, const Tensor& g,
                                                     const Hyper& h, const QuantSpec& spec,
                                                     const RngKey& key) {
  injection_strength(h.eta, h.beta1);
  require_same_shape(theta_hat, prev_error, "exact_injection_sgdm_step");
  SgdmUpdate upd = sgdm_update(theta_hat, m_im, g, h);
  QuantOutcome q = quantize(upd.theta_tilde, spec, key);
  ExactInjectionState out{std::move(q.quantized), std::move(upd.m_tilde), std::move(q.error)};
  const double inv_eta = 1.0 / h.eta;
  const double inv_eta_beta = 1.0 / (h.eta * h.beta1);
  for (std::size_t i = 0; i < out.m.size(); ++i)
    out.m[i] += inv_eta * prev_error[i] - inv_eta_beta * out.error[i];
  return out;
}

}  // namespace eco
