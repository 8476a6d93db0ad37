#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "eco/harness/objective.hpp"
#include "eco/train_step.hpp"
#include "eco/vector_stats.hpp"

namespace eco::harness {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct Quadratic1DSpec {
  double L = 1.0;
  bool operator==(const Quadratic1DSpec&) const = default;
};

/// Random rotation of evenly spaced eigenvalues in [eig_min, eig_max].
struct QuadraticNDSpec {
  std::size_t dim = 10;
  double eig_min = 0.1;
  double eig_max = 1.0;
  bool rotate = true;
  bool operator==(const QuadraticNDSpec&) const = default;
};

struct LinearRegressionSpec {
  std::size_t samples = 64;
  std::size_t dim = 8;
  double noise = 0.1;
  bool operator==(const LinearRegressionSpec&) const = default;
};

struct Mlp2Spec {
  std::size_t in = 8;
  std::size_t hidden = 16;
  std::size_t out = 1;
  std::size_t samples = 128;
  double noise = 0.05;
  bool operator==(const Mlp2Spec&) const = default;
};

using ObjectiveSpec = std::variant<Quadratic1DSpec, QuadraticNDSpec, LinearRegressionSpec, Mlp2Spec>;

/// Learning-rate schedule. Cosine warms up linearly from 0.01 * peak to peak
/// over the first warmup_frac of training, then decays to `floor`.
struct LrSchedule {
  enum class Kind { Constant, Cosine };
  Kind kind = Kind::Constant;
  double peak = 0.0;
  double floor = 0.0;
  double warmup_frac = 0.0;

  void validate() const {
    if (kind == Kind::Constant) return;
    if (!(peak > 0.0)) throw DomainError("schedule.peak must be positive");
    if (!(floor > 0.0 && floor <= peak)) throw DomainError("schedule.floor must lie in (0, peak]");
    if (!(warmup_frac >= 0.0 && warmup_frac < 1.0)) throw DomainError("schedule.warmup_frac must lie in [0, 1)");
  }

  double at(std::uint64_t step, std::uint64_t total, double base_eta) const {
    if (kind == Kind::Constant) return base_eta;
    const double T = static_cast<double>(total);
    const double t = static_cast<double>(step);
    const double warm = std::floor(warmup_frac * T);
    if (t < warm) return peak * (0.01 + 0.99 * t / warm);
    const double span = std::max(1.0, T - warm);
    const double p = std::min(1.0, (t - warm) / span);
    return floor + 0.5 * (peak - floor) * (1.0 + std::cos(std::numbers::pi * p));
  }

  bool operator==(const LrSchedule&) const = default;
};

struct TrainConfig {
  ObjectiveSpec objective = Quadratic1DSpec{};
  OptimizerKind optimizer = OptimizerKind::Sgdm;
  Mode mode = Mode::Eco;
  Hyper hyper;
  QuantSpec quant;                             ///< applied to every quantized group
  std::map<std::string, QuantSpec> group_quant;  ///< per-group overrides by parameter name
  bool quantize_io = false;
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;
  LrSchedule schedule;
  std::uint64_t metrics_every = 1;
  std::size_t batch_size = 0;  ///< rows per step for data-backed objectives, 0 = full batch
  double init_scale = 1.0;
  std::vector<double> init;  ///< explicit initial values (single-tensor objectives)

  void validate() const {
    hyper.validate();
    quant.validate();
    schedule.validate();
    if (quant.zero_point != 0.0) throw DomainError("quant.zero_point must be 0 for training");
    for (const auto& [name, q] : group_quant) {
      q.validate();
      if (q.zero_point != 0.0) throw DomainError("group_quant." + name + ".zero_point must be 0");
    }
    if (mode == Mode::ExactInjection && optimizer != OptimizerKind::Sgdm)
      throw DomainError("mode 'exact' requires optimizer 'sgdm'");
    if (metrics_every == 0) throw DomainError("metrics_every must be >= 1");
    if (!(init_scale >= 0.0)) throw DomainError("init_scale must be >= 0");
  }

  bool operator==(const TrainConfig&) const = default;
};

/// Derived seed for synthetic data so data draws never share keys with
/// quantization draws.
inline std::uint64_t data_seed(std::uint64_t seed) { return keyed_bits(RngKey{seed, ~0ULL, 0xDA7A, 0}); }

inline Objective build_objective(const ObjectiveSpec& spec, std::uint64_t seed) {
  const std::uint64_t ds = data_seed(seed);
  return std::visit(
      [&](const auto& s) -> Objective {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Quadratic1DSpec>) {
          return Objective(Quadratic1D{s.L});
        } else if constexpr (std::is_same_v<S, QuadraticNDSpec>) {
          if (s.dim == 0) throw DomainError("quadratic_nd.dim must be positive");
          if (!(s.eig_min >= 0.0 && s.eig_max >= s.eig_min))
            throw DomainError("quadratic_nd needs 0 <= eig_min <= eig_max");
          return Objective(QuadraticND{psd_matrix(linspace(s.eig_min, s.eig_max, s.dim), ds, s.rotate)});
        } else if constexpr (std::is_same_v<S, LinearRegressionSpec>) {
          if (s.samples == 0 || s.dim == 0) throw DomainError("linear_regression dims must be positive");
          return Objective(make_linear_regression(s.samples, s.dim, s.noise, ds));
        } else {
          if (s.samples == 0) throw DomainError("mlp2.samples must be positive");
          return Objective(make_mlp2(s.in, s.hidden, s.out, s.samples, s.noise, ds));
        }
      },
      spec);
}

inline std::vector<Tensor> initial_params(const TrainConfig& cfg, const Objective& obj) {
  const auto info = obj.layout();
  const std::uint64_t ds = data_seed(cfg.seed);
  if (!cfg.init.empty()) {
    if (info.size() != 1 || info[0].shape != Shape{cfg.init.size()})
      throw ShapeError("init: explicit initial values need a single-tensor objective of matching size");
    return {Tensor::vector(cfg.init)};
  }
  if (const auto* m = std::get_if<Mlp2>(&obj.kind())) return mlp2_init(m->in, m->hidden, m->out, ds);
  return {gaussian_tensor(info[0].shape, cfg.init_scale, ds, 0x41)};
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct ErrorMetrics {
  double rel = 0.0;  ///< |e_next| / |e_prev|
  double cos = 0.0;  ///< cos(e_prev, e_next)
};

/// Similarity of consecutive quantization errors; absent when either error
/// is zero.
inline std::optional<ErrorMetrics> consecutive_error_metrics(const Tensor& e_prev, const Tensor& e_next) {
  require_same_shape(e_prev, e_next, "consecutive_error_metrics");
  if (norm(e_prev) == 0.0 || norm(e_next) == 0.0) return std::nullopt;
  return ErrorMetrics{relative_norm(e_next, e_prev), cosine_similarity(e_prev, e_next)};
}

struct RunRow {
  std::uint64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  double m_norm_sq = 0.0;
  std::optional<double> err_cos;
  std::optional<double> err_relnorm;

  bool operator==(const RunRow&) const = default;
};

struct RunRecord {
  std::vector<RunRow> rows;
  bool diverged = false;
  std::uint64_t steps_completed = 0;
  double final_loss = 0.0;

  bool operator==(const RunRecord&) const = default;
};

inline constexpr double kDivergenceLoss = 1e12;

/// Called after every step with the step index, the updated groups and the
/// step outcome.
using StepObserver = std::function<void(std::uint64_t, const std::vector<ParamGroup>&, const StepOutcome&)>;

inline std::vector<ParamGroup> build_groups(const TrainConfig& cfg, const Objective& obj) {
  const auto info = obj.layout();
  const std::vector<Tensor> theta0 = initial_params(cfg, obj);
  std::vector<ParamGroup> groups;
  for (std::size_t i = 0; i < info.size(); ++i) {
    QuantSpec q;
    if (!info[i].io || cfg.quantize_io) {
      auto it = cfg.group_quant.find(info[i].name);
      q = it != cfg.group_quant.end() ? it->second : cfg.quant;
    }
    groups.push_back(make_group(info[i].name, i, theta0[i], cfg.optimizer, cfg.mode, q, cfg.hyper, cfg.seed));
  }
  return groups;
}

/// Rows drawn (with replacement) for the minibatch of `step`; empty means
/// full batch.
inline std::vector<std::size_t> minibatch_rows(std::uint64_t seed, std::uint64_t step, std::size_t batch,
                                               std::size_t n) {
  std::vector<std::size_t> rows;
  if (batch == 0 || n == 0) return rows;
  rows.reserve(batch);
  const RngKey key{data_seed(seed), step, 0xBA7C, 0};
  for (std::size_t i = 0; i < batch; ++i) {
    const double u = keyed_uniform(key.with_index(i));
    rows.push_back(std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n))));
  }
  return rows;
}

/// Index of the largest quantized group, if any.
inline std::optional<std::size_t> error_stream_group(const std::vector<ParamGroup>& groups) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].quant.is_identity()) continue;
    if (!best || groups[i].weights.size() > groups[*best].weights.size()) best = i;
  }
  return best;
}

/// Runs `cfg.steps` training steps. Gradients are always taken at the weights
/// the model sees (q(master) for MW). A row is recorded every metrics_every
/// steps plus a final row for the end state. With minibatching, per-step rows
/// carry the minibatch loss; the final row and final_loss use the full data.
inline RunRecord run_training(const TrainConfig& cfg, const StepObserver& observer = {}) {
  cfg.validate();
  const Objective obj = build_objective(cfg.objective, cfg.seed);
  std::vector<ParamGroup> groups = build_groups(cfg, obj);
  const std::optional<std::size_t> stream = error_stream_group(groups);

  auto momentum_sq = [&] {
    double acc = 0.0;
    for (const ParamGroup& g : groups) acc += norm_sq(momentum(g));
    return acc;
  };

  RunRecord rec;
  std::optional<Tensor> prev_error;
  std::vector<std::size_t> rows;
  auto grad_fn = [&](const std::vector<Tensor>& w) { return obj.evaluate(w, rows); };

  for (std::uint64_t t = 0; t < cfg.steps; ++t) {
    rows = minibatch_rows(cfg.seed, t, cfg.batch_size, obj.sample_count());
    Hyper h = cfg.hyper;
    h.eta = cfg.schedule.at(t, cfg.steps, cfg.hyper.eta);
    const double m_sq = momentum_sq();

    StepOutcome out;
    try {
      out = train_step(groups, grad_fn, h, cfg.seed, t);
    } catch (const DomainError&) {
      rec.diverged = true;  // non-finite iterate reached the quantizer
      break;
    }
    if (!std::isfinite(out.loss) || out.loss > kDivergenceLoss) {
      rec.diverged = true;
      break;
    }
    rec.steps_completed = t + 1;

    std::optional<ErrorMetrics> em;
    if (stream) {
      const Tensor& e = out.errors[*stream];
      if (prev_error) em = consecutive_error_metrics(*prev_error, e);
      prev_error = e;
    }
    if (t % cfg.metrics_every == 0) {
      RunRow row{t, h.eta, out.loss, out.grad_norm_sq, m_sq, std::nullopt, std::nullopt};
      if (em) {
        row.err_cos = em->cos;
        row.err_relnorm = em->rel;
      }
      rec.rows.push_back(row);
    }
    if (observer) observer(t, groups, out);
  }

  if (cfg.steps > 0 && !rec.diverged) {
    std::vector<Tensor> w;
    for (const ParamGroup& g : groups) w.push_back(g.weights);
    const Evaluation e = obj.evaluate(w);
    rec.final_loss = e.loss;
    rec.rows.push_back({cfg.steps, cfg.schedule.at(cfg.steps, cfg.steps, cfg.hyper.eta), e.loss,
                        global_norm_sq(e.grads), momentum_sq(), std::nullopt, std::nullopt});
    if (!std::isfinite(e.loss) || e.loss > kDivergenceLoss) rec.diverged = true;
  } else if (rec.diverged) {
    rec.final_loss = std::numeric_limits<double>::infinity();
  }
  return rec;
}

}  // namespace eco::harness
