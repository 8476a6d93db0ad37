#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "eco/optim.hpp"

namespace eco {

/// How quantization interacts with the optimizer.
enum class Mode {
  MasterWeights,   ///< high-precision master copy; the model sees q(master)
  Naive,           ///< update applied to quantized weights, error dropped
  Eco,             ///< update applied to quantized weights, error injected into momentum
  ExactInjection,  ///< stores the previous residual; reproduces MasterWeights exactly (SGDM only)
};

enum class OptimizerKind { Sgdm, Adam };

struct MasterWeightsState {
  Tensor master;
};
struct NaiveState {};
struct EcoState {};
struct ExactInjectionModeState {
  Tensor prev_error;
};

using ModeState = std::variant<MasterWeightsState, NaiveState, EcoState, ExactInjectionModeState>;

struct SgdmState {
  Tensor m;
  ModeState mode;
};

struct AdamState {
  Tensor m;
  Tensor v;
  std::uint64_t t = 0;
  ModeState mode;
};

using OptimizerState = std::variant<SgdmState, AdamState>;

/// A named parameter tensor with its own quantizer and optimizer state.
/// `weights` always holds what the model evaluates (quantized for every mode).
struct ParamGroup {
  std::string name;
  std::uint64_t id = 0;
  Tensor weights;
  QuantSpec quant;
  OptimizerState state;
};

inline Mode mode_of(const ModeState& s) { return static_cast<Mode>(s.index()); }

inline const ModeState& mode_state(const OptimizerState& s) {
  return std::visit([](const auto& st) -> const ModeState& { return st.mode; }, s);
}

inline const Tensor& momentum(const ParamGroup& g) {
  return std::visit([](const auto& st) -> const Tensor& { return st.m; }, g.state);
}

/// Key used for the quantization that produces the weights evaluated at `step`.
inline RngKey quant_key(std::uint64_t seed, std::uint64_t step, std::uint64_t group_id) {
  return RngKey{seed, step, group_id, 0};
}

/// Builds a group from initial high-precision values theta0 and zero momentum.
/// Quantizes theta0 with the step-0 key.
inline ParamGroup make_group(std::string name, std::uint64_t id, const Tensor& theta0,
                             OptimizerKind optimizer, Mode mode, const QuantSpec& quant,
                             const Hyper& h, std::uint64_t seed) {
  h.validate();
  quant.validate();
  if (quant.zero_point != 0.0)
    throw std::invalid_argument("training quantizers must be symmetric (zero_point == 0)");
  if (mode == Mode::ExactInjection && optimizer != OptimizerKind::Sgdm)
    throw std::invalid_argument("exact injection is only defined for SGDM");

  const RngKey key = quant_key(seed, 0, id);
  const Tensor zeros = Tensor::zeros_like(theta0);
  ParamGroup g{std::move(name), id, Tensor{}, quant, SgdmState{}};

  ModeState ms;
  Tensor m = zeros;
  switch (mode) {
    case Mode::MasterWeights:
      ms = MasterWeightsState{theta0};
      g.weights = quantize(theta0, quant, key).quantized;
      break;
    case Mode::Naive:
      ms = NaiveState{};
      g.weights = quantize(theta0, quant, key).quantized;
      break;
    case Mode::Eco:
      ms = EcoState{};
      g.weights = quantize(theta0, quant, key).quantized;
      break;
    case Mode::ExactInjection: {
      ExactInjectionState init = exact_injection_init(theta0, zeros, h, quant, key);
      g.weights = std::move(init.theta_hat);
      m = std::move(init.m);
      ms = ExactInjectionModeState{std::move(init.error)};
      break;
    }
  }
  if (optimizer == OptimizerKind::Sgdm)
    g.state = SgdmState{std::move(m), std::move(ms)};
  else
    g.state = AdamState{std::move(m), zeros, 0, std::move(ms)};
  return g;
}

/// Loss and gradients evaluated at the current (quantized) weights.
struct Evaluation {
  double loss = 0.0;
  std::vector<Tensor> grads;
};

struct StepOutcome {
  double loss = 0.0;
  double grad_norm_sq = 0.0;    ///< before clipping
  std::vector<Tensor> errors;   ///< per group, theta~ - theta^ of this step
};

inline double global_norm_sq(const std::vector<Tensor>& ts) {
  double acc = 0.0;
  for (const Tensor& t : ts) acc += norm_sq(t);
  return acc;
}

/// Scales all tensors jointly so their global norm is at most max_norm.
inline void clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  const double total = std::sqrt(global_norm_sq(grads));
  if (total <= max_norm || total == 0.0) return;
  const double s = max_norm / total;
  for (Tensor& g : grads)
    for (double& x : g) x *= s;
}

namespace detail {

inline void check_state(const ParamGroup& g) {
  std::visit(
      [&](const auto& st) {
        require_same_shape(g.weights, st.m, g.name + ": momentum");
        if (const auto* mw = std::get_if<MasterWeightsState>(&st.mode))
          require_same_shape(g.weights, mw->master, g.name + ": master weights");
        if (const auto* ex = std::get_if<ExactInjectionModeState>(&st.mode))
          require_same_shape(g.weights, ex->prev_error, g.name + ": stored error");
        if constexpr (std::is_same_v<std::decay_t<decltype(st)>, AdamState>) {
          require_same_shape(g.weights, st.v, g.name + ": second moment");
          if (std::holds_alternative<ExactInjectionModeState>(st.mode))
            throw std::invalid_argument(g.name + ": exact injection is only defined for SGDM");
        }
      },
      g.state);
}

inline Tensor step_group(ParamGroup& g, const Tensor& grad, const Hyper& h, const RngKey& key) {
  Tensor error;
  if (auto* st = std::get_if<SgdmState>(&g.state)) {
    switch (mode_of(st->mode)) {
      case Mode::MasterWeights: {
        auto& master = std::get<MasterWeightsState>(st->mode).master;
        SgdmUpdate u = sgdm_update(master, st->m, grad, h);
        master = std::move(u.theta_tilde);
        st->m = std::move(u.m_tilde);
        QuantOutcome q = quantize(master, g.quant, key);
        g.weights = std::move(q.quantized);
        error = std::move(q.error);
        break;
      }
      case Mode::Naive: {
        SgdmUpdate u = sgdm_update(g.weights, st->m, grad, h);
        st->m = std::move(u.m_tilde);
        QuantOutcome q = quantize(u.theta_tilde, g.quant, key);
        g.weights = std::move(q.quantized);
        error = std::move(q.error);
        break;
      }
      case Mode::Eco: {
        SgdmUpdate u = sgdm_update(g.weights, st->m, grad, h);
        EcoQuantized r = eco_quantize_sgdm(u.theta_tilde, u.m_tilde, h, g.quant, key);
        g.weights = std::move(r.theta_hat);
        st->m = std::move(r.m_hat);
        error = std::move(r.error);
        break;
      }
      case Mode::ExactInjection: {
        auto& prev = std::get<ExactInjectionModeState>(st->mode).prev_error;
        ExactInjectionState r = exact_injection_sgdm_step(g.weights, st->m, prev, grad, h, g.quant, key);
        g.weights = std::move(r.theta_hat);
        st->m = std::move(r.m);
        prev = r.error;
        error = std::move(r.error);
        break;
      }
    }
    return error;
  }

  auto& st = std::get<AdamState>(g.state);
  switch (mode_of(st.mode)) {
    case Mode::MasterWeights: {
      auto& master = std::get<MasterWeightsState>(st.mode).master;
      AdamUpdate u = adam_update(master, st.m, st.v, st.t, grad, h);
      master = std::move(u.theta_tilde);
      st.m = std::move(u.m_tilde);
      st.v = std::move(u.v_next);
      st.t = u.t_next;
      QuantOutcome q = quantize(master, g.quant, key);
      g.weights = std::move(q.quantized);
      error = std::move(q.error);
      break;
    }
    case Mode::Naive: {
      AdamUpdate u = adam_update(g.weights, st.m, st.v, st.t, grad, h);
      QuantOutcome q = quantize(u.theta_tilde, g.quant, key);
      st.m = std::move(u.m_tilde);
      st.v = std::move(u.v_next);
      st.t = u.t_next;
      g.weights = std::move(q.quantized);
      error = std::move(q.error);
      break;
    }
    case Mode::Eco: {
      AdamUpdate u = adam_update(g.weights, st.m, st.v, st.t, grad, h);
      EcoQuantized r = eco_quantize_adam(u.theta_tilde, u.m_tilde, u.v_next, u.t_next, h, g.quant, key);
      g.weights = std::move(r.theta_hat);
      st.m = std::move(r.m_hat);
      st.v = std::move(u.v_next);
      st.t = u.t_next;
      error = std::move(r.error);
      break;
    }
    case Mode::ExactInjection:
      throw std::invalid_argument(g.name + ": exact injection is only defined for SGDM");
  }
  return error;
}

}  // namespace detail

/// One global step: evaluate gradients at the current weights, clip by global
/// norm, then per group run the optimizer update followed by the mode's
/// quantization rule. The new weights are quantized with the key of step + 1.
template <typename GradFn>
StepOutcome train_step(std::vector<ParamGroup>& groups, GradFn&& grad_fn, const Hyper& h,
                       std::uint64_t seed, std::uint64_t step) {
  h.validate();
  for (const ParamGroup& g : groups) detail::check_state(g);

  std::vector<Tensor> weights;
  weights.reserve(groups.size());
  for (const ParamGroup& g : groups) weights.push_back(g.weights);

  Evaluation eval = grad_fn(std::as_const(weights));
  if (eval.grads.size() != groups.size())
    throw ShapeError("train_step: gradient count does not match parameter groups");

  StepOutcome out;
  out.loss = eval.loss;
  out.grad_norm_sq = global_norm_sq(eval.grads);
  if (h.clip_norm) clip_global_norm(eval.grads, *h.clip_norm);

  out.errors.reserve(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    ParamGroup& g = groups[i];
    require_same_shape(g.weights, eval.grads[i], g.name + ": gradient");
    out.errors.push_back(detail::step_group(g, eval.grads[i], h, quant_key(seed, step + 1, g.id)));
  }
  return out;
}

}  // namespace eco
