#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eco/harness/training.hpp"
#include "eco/memory.hpp"
#include "eco/monte_carlo.hpp"
#include "eco/theory.hpp"
#include "eco/train_step.hpp"
#include "eco/virtual_sequence.hpp"

namespace eco::validation {

struct Measurement {
  std::string name;
  double value = 0.0;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::vector<Measurement> measured;
  std::vector<Measurement> thresholds;
  double seconds = 0.0;
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline harness::Objective quadratic(std::size_t dim, double eig_min, double eig_max, std::uint64_t seed) {
  return harness::build_objective(harness::QuadraticNDSpec{dim, eig_min, eig_max, true}, seed);
}

inline double lambda_max(const harness::Objective& obj) {
  // Power iteration; H is PSD so the dominant eigenvalue is the largest.
  const auto& H = std::get<harness::QuadraticND>(obj.kind()).H;
  const std::size_t d = H.shape()[0];
  std::vector<double> x(d, 1.0), y(d);
  double lam = 0.0;
  for (int it = 0; it < 2000; ++it) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += H[i * d + j] * x[j];
      y[i] = acc;
    }
    double n = 0.0;
    for (double v : y) n += v * v;
    n = std::sqrt(n);
    if (n == 0.0) return 0.0;
    for (std::size_t i = 0; i < d; ++i) x[i] = y[i] / n;
    lam = n;
  }
  return lam;
}

/// SGDM trajectory of one group: weights and momentum after each step plus
/// the (unclipped) gradient used at each step.
struct Trajectory {
  std::vector<Tensor> weights;  // T + 1
  std::vector<Tensor> momenta;  // T + 1
  std::vector<Tensor> grads;    // T, as fed to the optimizer (after clipping)
  std::vector<double> grad_norm_sq;  // T, before clipping
};

inline Trajectory run_group(const harness::Objective& obj, const Tensor& theta0, Mode mode, const QuantSpec& q,
                            const Hyper& h, std::uint64_t seed, std::uint64_t steps) {
  std::vector<ParamGroup> groups{make_group("w", 0, theta0, OptimizerKind::Sgdm, mode, q, h, seed)};
  Trajectory tr;
  tr.weights.push_back(groups[0].weights);
  tr.momenta.push_back(momentum(groups[0]));
  Tensor last_grad;
  auto grad_fn = [&](const std::vector<Tensor>& w) {
    Evaluation e = obj.evaluate(w);
    std::vector<Tensor> clipped = e.grads;
    if (h.clip_norm) clip_global_norm(clipped, *h.clip_norm);
    last_grad = clipped[0];
    return e;
  };
  for (std::uint64_t t = 0; t < steps; ++t) {
    const StepOutcome out = train_step(groups, grad_fn, h, seed, t);
    tr.grads.push_back(last_grad);
    tr.grad_norm_sq.push_back(out.grad_norm_sq);
    tr.weights.push_back(groups[0].weights);
    tr.momenta.push_back(momentum(groups[0]));
  }
  return tr;
}

inline Hyper sgdm(double eta, double beta, std::optional<double> clip = std::nullopt) {
  Hyper h;
  h.eta = eta;
  h.beta1 = beta;
  h.clip_norm = clip;
  return h;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 1. Exact injection reproduces the master-weight trajectory.
// ---------------------------------------------------------------------------

inline CriterionResult exact_injection_equivalence() {
  detail::Stopwatch sw;
  CriterionResult r{1, "exact injection equals quantized master-weight trajectory", false, {}, {}, 0.0};
  const harness::Objective obj = detail::quadratic(100, 0.1, 1.0, 101);
  const Tensor theta0 = harness::gaussian_tensor({100}, 1.0, 7, 0x41);
  const Hyper h = detail::sgdm(0.05, 0.9);
  double worst = 0.0;
  for (Rounding rd : {Rounding::RTN, Rounding::SR}) {
    const QuantSpec q = fixed_step_spec(0.05, rd);
    const auto mw = detail::run_group(obj, theta0, Mode::MasterWeights, q, h, 2024, 1000);
    const auto ex = detail::run_group(obj, theta0, Mode::ExactInjection, q, h, 2024, 1000);
    double dev = 0.0;
    for (std::size_t t = 0; t < mw.weights.size(); ++t) dev = std::max(dev, max_abs_diff(mw.weights[t], ex.weights[t]));
    r.measured.push_back({rd == Rounding::RTN ? "max_dev_rtn" : "max_dev_sr", dev});
    worst = std::max(worst, dev);
  }
  r.seconds = sw.seconds();
  r.measured.push_back({"seconds", r.seconds});
  r.thresholds = {{"max_dev", 1e-9}, {"seconds", 5.0}};
  r.passed = worst <= 1e-9 && r.seconds < 5.0;
  return r;
}

// ---------------------------------------------------------------------------
// 2. Virtual sequence is plain gradient descent under ECO, not under Naive.
// ---------------------------------------------------------------------------

inline CriterionResult virtual_dynamics() {
  detail::Stopwatch sw;
  CriterionResult r{2, "virtual sequence follows gradient descent (eco) and not (naive)", false, {}, {}, 0.0};
  const double delta = 0.05, beta = 0.9, eta = 0.1;
  const harness::Objective obj = detail::quadratic(10, 0.1, 1.0, 202);
  const Tensor theta0 = harness::gaussian_tensor({10}, 1.0, 11, 0x41);
  const Hyper h = detail::sgdm(eta, beta);
  const QuantSpec q = fixed_step_spec(delta, Rounding::RTN);

  const auto eco = detail::run_group(obj, theta0, Mode::Eco, q, h, 5, 1000);
  const auto eco_res = theory::check_virtual_dynamics(eco.weights, eco.momenta, eco.grads, eta, beta);
  const auto nai = detail::run_group(obj, theta0, Mode::Naive, q, h, 5, 1000);
  const auto nai_res = theory::check_virtual_dynamics(nai.weights, nai.momenta, nai.grads, eta, beta);

  r.seconds = sw.seconds();
  r.measured = {{"eco_residual_l2", eco_res.max_l2},
                {"eco_residual_inf", eco_res.max_inf},
                {"naive_residual_l2", nai_res.max_l2},
                {"naive_residual_inf", nai_res.max_inf},
                {"seconds", r.seconds}};
  const double naive_floor = delta / (2.0 * beta);
  r.thresholds = {{"eco_residual_max", 1e-10}, {"naive_residual_min", naive_floor}, {"seconds", 5.0}};
  r.passed = eco_res.max_l2 <= 1e-10 && nai_res.max_l2 >= naive_floor && r.seconds < 5.0;
  return r;
}

// ---------------------------------------------------------------------------
// 3. Closed-form stationary moments agree with simulation.
// ---------------------------------------------------------------------------

struct SimulationRow {
  double eta = 0.0;
  double beta = 0.0;
  theory::Regime regime = theory::Regime::Eco;
  double closed_form_u = 0.0;  ///< model-sight E[x^2] (u + sigma2 for MW)
  double monte_carlo_u = 0.0;
  double rel_err = 0.0;
  bool diverged = false;
};

inline SimulationRow simulate_cell(theory::Regime regime, double L, double eta, double beta, double sigma2,
                                   std::uint64_t steps, std::uint64_t seed) {
  theory::MonteCarloConfig cfg;
  cfg.regime = regime;
  cfg.L = L;
  cfg.eta = eta;
  cfg.beta = beta;
  cfg.delta = std::sqrt(12.0 * sigma2);
  cfg.steps = steps;
  cfg.burn_in = steps / 5;
  cfg.seed = seed;
  SimulationRow row{eta, beta, regime, theory::stationary_model_sq(regime, L, eta, beta, sigma2), 0.0, 0.0, false};
  const auto mc = theory::monte_carlo_1d(cfg);
  row.monte_carlo_u = mc.mean_xhat_sq;
  row.diverged = mc.diverged;
  row.rel_err = row.closed_form_u > 0.0 ? std::abs(row.monte_carlo_u - row.closed_form_u) / row.closed_form_u
                                        : std::abs(row.monte_carlo_u);
  return row;
}

inline constexpr double kGridDelta = 0.346;

inline std::vector<SimulationRow> closed_form_grid(std::uint64_t steps = 10'000'000, std::uint64_t seed = 1) {
  const double sigma2 = theory::noise_variance(kGridDelta);
  std::vector<SimulationRow> rows;
  for (double eta : {0.2, 0.1, 0.05})
    for (double beta : {0.5, 0.9})
      for (auto reg : {theory::Regime::MW, theory::Regime::Naive, theory::Regime::Eco})
        rows.push_back(simulate_cell(reg, 1.0, eta, beta, sigma2, steps, seed));
  return rows;
}

inline CriterionResult closed_form_vs_simulation() {
  detail::Stopwatch sw;
  CriterionResult r{3, "stationary moments match simulation on the step-size grid", false, {}, {}, 0.0};
  double worst = 0.0;
  bool diverged = false;
  for (const SimulationRow& row : closed_form_grid()) {
    worst = std::max(worst, row.rel_err);
    diverged = diverged || row.diverged;
  }
  r.seconds = sw.seconds();
  r.measured = {{"max_rel_err", worst}, {"diverged_cells", diverged ? 1.0 : 0.0}, {"seconds", r.seconds}};
  r.thresholds = {{"max_rel_err", 0.03}, {"seconds", 60.0}};
  r.passed = !diverged && worst <= 0.03 && r.seconds < 60.0;
  return r;
}

// ---------------------------------------------------------------------------
// 4. Naive stationary gradient grows like 1 / eta.
// ---------------------------------------------------------------------------

inline CriterionResult naive_inverse_eta() {
  detail::Stopwatch sw;
  CriterionResult r{4, "naive stationary gradient scales like 1/eta", false, {}, {}, 0.0};
  using theory::Regime;
  const double beta = 0.5, L = 1.0, sigma2 = theory::noise_variance(kGridDelta);
  const double cf = theory::stationary_grad_sq(Regime::Naive, L, 5e-4, beta, sigma2) /
                    theory::stationary_grad_sq(Regime::Naive, L, 1e-3, beta, sigma2);
  const double hi = simulate_cell(Regime::Naive, L, 1e-2, beta, sigma2, 10'000'000, 4).monte_carlo_u;
  const double lo = simulate_cell(Regime::Naive, L, 5e-3, beta, sigma2, 10'000'000, 4).monte_carlo_u;
  const double mc = lo / hi;
  r.seconds = sw.seconds();
  r.measured = {{"closed_form_ratio", cf}, {"monte_carlo_ratio", mc}, {"seconds", r.seconds}};
  r.thresholds = {{"closed_form_rel_tol", 0.01}, {"monte_carlo_rel_tol", 0.10}};
  r.passed = std::abs(cf / 2.0 - 1.0) <= 0.01 && std::abs(mc / 2.0 - 1.0) <= 0.10;
  return r;
}

// ---------------------------------------------------------------------------
// 5. ECO stationary gradient approaches L^2 sigma^2 / (1 - beta^2).
// ---------------------------------------------------------------------------

inline CriterionResult eco_noise_floor() {
  detail::Stopwatch sw;
  CriterionResult r{5, "eco stationary gradient tends to L^2 sigma^2/(1-beta^2)", false, {}, {}, 0.0};
  using theory::Regime;
  const double L = 1.0, sigma2 = theory::noise_variance(kGridDelta);
  bool ok = true;
  for (double beta : {0.5, 0.9}) {
    const double limit = L * L * sigma2 / (1.0 - beta * beta);
    const double cf = theory::stationary_grad_sq(Regime::Eco, L, 1e-4, beta, sigma2);
    const double mc = L * L * simulate_cell(Regime::Eco, L, 1e-3, beta, sigma2, 10'000'000, 5).monte_carlo_u;
    const double cf_err = std::abs(cf - limit) / limit;
    const double mc_err = std::abs(mc - limit) / limit;
    const std::string tag = beta == 0.5 ? "_b05" : "_b09";
    r.measured.push_back({"closed_form_rel_err" + tag, cf_err});
    r.measured.push_back({"monte_carlo_rel_err" + tag, mc_err});
    ok = ok && cf_err <= 0.005 && mc_err <= 0.05;
  }
  r.seconds = sw.seconds();
  r.measured.push_back({"seconds", r.seconds});
  r.thresholds = {{"closed_form_rel_tol", 0.005}, {"monte_carlo_rel_tol", 0.05}};
  r.passed = ok;
  return r;
}

// ---------------------------------------------------------------------------
// 6, 7. Momentum bounds.
// ---------------------------------------------------------------------------

namespace detail {

struct MomentumSetup {
  std::size_t dim = 10;
  double delta = 0.05;
  double eta = 0.05;
  double beta = 0.9;
  double G = 1.0;
  std::uint64_t steps = 100'000;
};

inline Trajectory momentum_run(const MomentumSetup& s, Rounding rd, std::uint64_t seed) {
  const harness::Objective obj = quadratic(s.dim, 0.1, 1.0, 303);
  // Start far out so clipping is active for the first stretch of training.
  const Tensor theta0 = harness::gaussian_tensor({s.dim}, 20.0, 13, 0x41);
  return run_group(obj, theta0, Mode::Eco, fixed_step_spec(s.delta, rd), sgdm(s.eta, s.beta, s.G), seed, s.steps);
}

}  // namespace detail

inline CriterionResult stochastic_momentum_bound() {
  detail::Stopwatch sw;
  CriterionResult r{6, "running mean of |m|^2 stays below M^2 under stochastic rounding", false, {}, {}, 0.0};
  const detail::MomentumSetup s;
  theory::TheoryParams p;
  p.G = s.G;
  p.sigma2 = static_cast<double>(s.dim) * s.delta * s.delta / 4.0;
  p.beta = s.beta;
  p.eta = s.eta;
  const double M2 = theory::bounds(p).M2_stoch;

  const auto tr = detail::momentum_run(s, Rounding::SR, 6);
  double acc = 0.0, worst = 0.0;
  std::size_t violations = 0;
  for (std::size_t t = 0; t < tr.momenta.size(); ++t) {
    acc += norm_sq(tr.momenta[t]);
    if ((t + 1) % 1000 == 0 || t + 1 == tr.momenta.size()) {
      const double mean = acc / static_cast<double>(t + 1);
      worst = std::max(worst, mean);
      if (mean > M2) ++violations;
    }
  }
  r.seconds = sw.seconds();
  r.measured = {{"max_running_mean_m_sq", worst}, {"violations", static_cast<double>(violations)},
                {"seconds", r.seconds}};
  r.thresholds = {{"M2", M2}};
  r.passed = violations == 0;
  return r;
}

inline CriterionResult deterministic_momentum_bound() {
  detail::Stopwatch sw;
  CriterionResult r{7, "|m| stays below M_det pathwise under round-to-nearest", false, {}, {}, 0.0};
  const detail::MomentumSetup s;
  theory::TheoryParams p;
  p.G = s.G;
  p.delta = s.delta * std::sqrt(static_cast<double>(s.dim)) / 2.0;
  p.beta = s.beta;
  p.eta = s.eta;
  const double M_det = theory::bounds(p).M_det;

  const auto tr = detail::momentum_run(s, Rounding::RTN, 7);
  double worst = 0.0;
  std::size_t violations = 0;
  for (const Tensor& m : tr.momenta) {
    const double n = norm(m);
    worst = std::max(worst, n);
    if (n > M_det) ++violations;
  }
  r.seconds = sw.seconds();
  r.measured = {{"max_m_norm", worst}, {"violations", static_cast<double>(violations)}, {"seconds", r.seconds}};
  r.thresholds = {{"M_det", M_det}};
  r.passed = violations == 0;
  return r;
}

// ---------------------------------------------------------------------------
// 8. Descent inequality for the virtual sequence.
// ---------------------------------------------------------------------------

inline CriterionResult descent_inequality() {
  detail::Stopwatch sw;
  CriterionResult r{8, "virtual sequence satisfies the descent inequality pathwise", false, {}, {}, 0.0};
  struct Case {
    std::size_t dim;
    double eig_min, eig_max;
    Rounding rd;
  };
  const Case cases[] = {{10, 0.1, 1.0, Rounding::RTN}, {10, 0.1, 1.0, Rounding::SR},
                        {50, 0.01, 2.0, Rounding::RTN}, {50, 0.01, 2.0, Rounding::SR}};
  const double beta = 0.9, delta = 0.05, slack = 1e-9;
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t violations = 0;
  std::uint64_t seed = 80;
  for (const Case& c : cases) {
    const harness::Objective obj = detail::quadratic(c.dim, c.eig_min, c.eig_max, seed);
    const double L = detail::lambda_max(obj);
    const double eta = 1.0 / (4.0 * L);
    const double C = eta * beta / (1.0 - beta);
    const Tensor theta0 = harness::gaussian_tensor({c.dim}, 2.0, seed, 0x41);
    const auto tr = detail::run_group(obj, theta0, Mode::Eco, fixed_step_spec(delta, c.rd), detail::sgdm(eta, beta),
                                      seed, 10'000);
    auto f = [&](const Tensor& x) { return harness::objective_eval(obj, x).first; };
    double f_prev = f(theory::virtual_point(tr.weights[0], tr.momenta[0], eta, beta));
    for (std::size_t t = 0; t + 1 < tr.weights.size(); ++t) {
      const double f_next = f(theory::virtual_point(tr.weights[t + 1], tr.momenta[t + 1], eta, beta));
      const double rhs = f_prev - 0.25 * eta * tr.grad_norm_sq[t] +
                         0.5 * eta * L * L * C * C * norm_sq(tr.momenta[t]);
      const double excess = f_next - rhs;
      worst = std::max(worst, excess);
      if (excess > slack) ++violations;
      f_prev = f_next;
    }
    ++seed;
  }
  r.seconds = sw.seconds();
  r.measured = {{"max_excess", worst}, {"violations", static_cast<double>(violations)}, {"seconds", r.seconds}};
  r.thresholds = {{"slack", slack}};
  r.passed = violations == 0;
  return r;
}

// ---------------------------------------------------------------------------
// 9. Convergence envelope under stochastic rounding.
// ---------------------------------------------------------------------------

inline CriterionResult convergence_envelope() {
  detail::Stopwatch sw;
  CriterionResult r{9, "min_t seed-averaged |grad|^2 within the convergence envelope", false, {}, {}, 0.0};
  const std::size_t d = 10, seeds = 20;
  const std::uint64_t T = 10'000;
  const double delta = 0.05, beta = 0.9;
  const harness::Objective obj = detail::quadratic(d, 0.1, 1.0, 909);
  const double L = detail::lambda_max(obj);
  const double eta = 1.0 / (2.0 * L);
  // On-grid start: theta^_0 = theta_0 and m^_0 = 0, so the virtual start is theta_0.
  Tensor theta0 = harness::gaussian_tensor({d}, 2.0, 9, 0x41);
  theta0 = quantize(theta0, fixed_step_spec(delta), RngKey{}).quantized;
  const double f_gap = harness::objective_eval(obj, theta0).first;

  std::vector<double> mean_g(T, 0.0);
  double G = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto tr = detail::run_group(obj, theta0, Mode::Eco, fixed_step_spec(delta, Rounding::SR),
                                      detail::sgdm(eta, beta), 9000 + s, T);
    for (std::uint64_t t = 0; t < T; ++t) {
      mean_g[t] += tr.grad_norm_sq[t] / static_cast<double>(seeds);
      G = std::max(G, std::sqrt(tr.grad_norm_sq[t]));
    }
  }
  theory::TheoryParams p;
  p.L = L;
  p.G = G;
  p.sigma2 = static_cast<double>(d) * delta * delta / 4.0;
  p.beta = beta;
  p.eta = eta;
  p.f_gap = f_gap;
  const double envelope = theory::bounds(p).stoch_envelope(p, static_cast<double>(T));
  const double best = *std::min_element(mean_g.begin(), mean_g.end());
  r.seconds = sw.seconds();
  r.measured = {{"min_mean_grad_sq", best}, {"G", G}, {"f_gap", f_gap}, {"seconds", r.seconds}};
  r.thresholds = {{"envelope", envelope}};
  r.passed = best <= envelope;
  return r;
}

// ---------------------------------------------------------------------------
// 10. Regime ordering on a small tanh network.
// ---------------------------------------------------------------------------

struct ProxyRun {
  double final_loss = 0.0;
  double loss_at_tenth = 0.0;
  bool diverged = false;
};

/// Small tanh network on noisy teacher data. The grid is coarse relative to
/// lr * |m| so that round-to-nearest without master weights cannot move, and
/// two-sample minibatches keep the momentum noisy at convergence.
inline harness::TrainConfig proxy_config(Mode mode, Rounding rd, std::uint64_t seed) {
  harness::TrainConfig cfg;
  cfg.objective = harness::Mlp2Spec{8, 16, 1, 2048, 0.1};
  cfg.optimizer = OptimizerKind::Sgdm;
  cfg.mode = mode;
  cfg.hyper.eta = 0.02;
  cfg.hyper.beta1 = 0.5;
  cfg.quant = fixed_step_spec(0.05, rd);
  cfg.quantize_io = true;
  cfg.steps = 6000;
  cfg.seed = seed;
  cfg.batch_size = 2;
  cfg.schedule = {harness::LrSchedule::Kind::Cosine, 0.02, 2e-5, 0.05};
  cfg.metrics_every = 100;
  return cfg;
}

/// Runs a proxy config; loss_at_tenth is the full-data loss of the weights
/// after the first 10% of steps.
inline ProxyRun proxy_run(const harness::TrainConfig& cfg) {
  const harness::Objective obj = harness::build_objective(cfg.objective, cfg.seed);
  const std::uint64_t tenth = cfg.steps / 10;
  double at_tenth = 0.0;
  auto observer = [&](std::uint64_t t, const std::vector<ParamGroup>& groups, const StepOutcome&) {
    if (t + 1 != tenth) return;
    std::vector<Tensor> w;
    for (const ParamGroup& g : groups) w.push_back(g.weights);
    at_tenth = obj.value(w);
  };
  const harness::RunRecord rec = harness::run_training(cfg, observer);
  return {rec.final_loss, at_tenth, rec.diverged};
}

inline CriterionResult regime_ordering() {
  detail::Stopwatch sw;
  CriterionResult r{10, "mw <= eco_sr <= naive_sr with 5x gap ratio; naive_rtn stalls", false, {}, {}, 0.0};
  const std::uint64_t seeds[] = {1, 2, 3};
  double mw = 0.0, eco = 0.0, naive = 0.0, max_rtn_improvement = 0.0;
  bool ok = true;
  for (std::uint64_t seed : seeds) {
    // The master-weight baseline casts to the grid with round-to-nearest.
    const ProxyRun m = proxy_run(proxy_config(Mode::MasterWeights, Rounding::RTN, seed));
    const ProxyRun e = proxy_run(proxy_config(Mode::Eco, Rounding::SR, seed));
    const ProxyRun n = proxy_run(proxy_config(Mode::Naive, Rounding::SR, seed));
    const ProxyRun rtn = proxy_run(proxy_config(Mode::Naive, Rounding::RTN, seed));
    const std::string tag = "_s" + std::to_string(seed);
    r.measured.push_back({"mw" + tag, m.final_loss});
    r.measured.push_back({"eco_sr" + tag, e.final_loss});
    r.measured.push_back({"naive_sr" + tag, n.final_loss});
    r.measured.push_back({"naive_rtn" + tag, rtn.final_loss});
    mw += m.final_loss / 3.0;
    eco += e.final_loss / 3.0;
    naive += n.final_loss / 3.0;
    const double improvement =
        rtn.loss_at_tenth > 0.0 ? (rtn.loss_at_tenth - rtn.final_loss) / rtn.loss_at_tenth : 0.0;
    max_rtn_improvement = std::max(max_rtn_improvement, improvement);
    ok = ok && !m.diverged && !e.diverged && !n.diverged && (rtn.diverged || improvement < 0.01);
  }
  const double gap_ratio = (naive - eco) / std::max(eco - mw, 1e-300);
  ok = ok && mw <= eco && eco <= naive && gap_ratio >= 5.0;
  r.seconds = sw.seconds();
  r.measured.push_back({"mean_mw", mw});
  r.measured.push_back({"mean_eco_sr", eco});
  r.measured.push_back({"mean_naive_sr", naive});
  r.measured.push_back({"gap_ratio", gap_ratio});
  r.measured.push_back({"max_rtn_improvement", max_rtn_improvement});
  r.measured.push_back({"seconds", r.seconds});
  r.thresholds = {{"gap_ratio_min", 5.0}, {"rtn_improvement_max", 0.01}};
  r.passed = ok;
  return r;
}

// ---------------------------------------------------------------------------
// 11. Static memory accounting.
// ---------------------------------------------------------------------------

inline CriterionResult memory_accounting() {
  detail::Stopwatch sw;
  CriterionResult r{11, "bytes per parameter 12 -> 9 (25% reduction)", false, {}, {}, 0.0};
  using F = StorageFormat;
  const double with_master = memory_bytes_per_param(F::None, F::Fp32, F::Fp32, F::Fp32);
  const double without = memory_bytes_per_param(F::Fp8, std::nullopt, F::Fp32, F::Fp32);
  const double reduction = (with_master - without) / with_master;
  r.seconds = sw.seconds();
  r.measured = {{"master_state_bytes", with_master}, {"eco_bytes", without}, {"reduction", reduction}};
  r.thresholds = {{"master_state_bytes", 12.0}, {"eco_bytes", 9.0}, {"reduction", 0.25}};
  r.passed = with_master == 12.0 && without == 9.0 && reduction == 0.25;
  return r;
}

// ---------------------------------------------------------------------------
// 12. Quantizer properties.
// ---------------------------------------------------------------------------

inline CriterionResult quantizer_suite() {
  detail::Stopwatch sw;
  CriterionResult r{12, "quantizer: SR unbiased, RTN half-step, idempotence, noise variance", false, {}, {}, 0.0};
  const std::size_t n = 1'000'000;
  const double delta = 0.1;

  // SR unbiasedness at an off-grid point.
  const double x = 0.337;
  const Tensor xs(Shape{n}, x);
  const QuantOutcome sr = quantize(xs, fixed_step_spec(delta, Rounding::SR), RngKey{12, 0, 0, 0});
  double mean = 0.0;
  for (double v : sr.quantized) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : sr.quantized) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  const double se = std::sqrt(var / static_cast<double>(n));
  const double z = std::abs(mean - x) / se;

  // RTN half-step bound on spread-out inputs, fixed and dynamic scales.
  const Tensor spread = harness::gaussian_tensor({n}, 3.0, 12, 0x51);
  double rtn_excess = -std::numeric_limits<double>::infinity();
  {
    const QuantOutcome q = quantize(spread, fixed_step_spec(delta, Rounding::RTN), RngKey{});
    rtn_excess = max_abs(q.error) - delta / 2.0;
    QuantSpec int8{IntSymmetric{8}, Rounding::RTN, Granularity::TensorWise, 0.0};
    const QuantOutcome qi = quantize(spread, int8, RngKey{});
    rtn_excess = std::max(rtn_excess, max_abs(qi.error) - qi.scale[0] / 2.0 * (1.0 + 1e-12));
  }

  // Idempotence of the fixed grid under both roundings.
  double idem = 0.0;
  for (Rounding rd : {Rounding::RTN, Rounding::SR}) {
    const QuantSpec q = fixed_step_spec(delta, rd);
    const Tensor once = quantize(spread, q, RngKey{1, 0, 0, 0}).quantized;
    const Tensor twice = quantize(once, q, RngKey{2, 0, 0, 0}).quantized;
    idem = std::max(idem, max_abs_diff(once, twice));
  }

  // Noise model variance.
  const Tensor zeros(Shape{n}, 0.0);
  const QuantSpec nm{NoiseModel{delta}, Rounding::SR, Granularity::TensorWise, 0.0};
  const QuantOutcome noisy = quantize(zeros, nm, RngKey{3, 0, 0, 0});
  double m1 = 0.0, m2 = 0.0;
  for (double v : noisy.quantized) {
    m1 += v;
    m2 += v * v;
  }
  m1 /= static_cast<double>(n);
  const double nvar = m2 / static_cast<double>(n) - m1 * m1;
  const double nvar_err = std::abs(nvar / (delta * delta / 12.0) - 1.0);

  r.seconds = sw.seconds();
  r.measured = {{"sr_bias_z", z}, {"rtn_excess_over_half_step", rtn_excess}, {"idempotence_dev", idem},
                {"noise_variance_rel_err", nvar_err}};
  r.thresholds = {{"sr_bias_z", 4.0}, {"rtn_excess_over_half_step", 0.0}, {"idempotence_dev", 0.0},
                  {"noise_variance_rel_err", 0.02}};
  r.passed = z <= 4.0 && rtn_excess <= 0.0 && idem == 0.0 && nvar_err <= 0.02;
  return r;
}

// ---------------------------------------------------------------------------

using Criterion = std::function<CriterionResult()>;

inline std::vector<Criterion> all_criteria() {
  return {exact_injection_equivalence, virtual_dynamics,    closed_form_vs_simulation,
          naive_inverse_eta,           eco_noise_floor,     stochastic_momentum_bound,
          deterministic_momentum_bound, descent_inequality, convergence_envelope,
          regime_ordering,             memory_accounting,   quantizer_suite};
}

}  // namespace eco::validation
