#pragma once

#include <cmath>
#include <cstdint>
#include <future>
#include <vector>

#include "eco/random.hpp"
#include "eco/theory.hpp"

namespace eco::theory {

struct MonteCarloConfig {
  Regime regime = Regime::Eco;
  double L = 1.0;
  double eta = 0.1;
  double beta = 0.5;
  double delta = 1.0;  ///< dither width; sigma^2 = delta^2 / 12
  std::uint64_t steps = 1'000'000;
  std::uint64_t burn_in = 200'000;
  std::uint64_t seed = 0;
  double x0 = 1.0;
  std::uint64_t replicas = 1;
};

struct MonteCarloResult {
  double mean_xhat_sq = 0.0;  ///< time average of x^_t^2 over t in [burn_in, steps)
  std::uint64_t samples = 0;
  bool diverged = false;
};

inline double noise_variance(double delta) { return delta * delta / 12.0; }

namespace detail {

inline constexpr double kDivergenceBound = 1e100;

// Replica r reproduces the harness key schedule with group id r: the draw that
// produces x^_t uses key (seed, t, r, 0).
inline MonteCarloResult simulate_replica(const MonteCarloConfig& cfg, std::uint64_t replica) {
  const double L = cfg.L, eta = cfg.eta, beta = cfg.beta, delta = cfg.delta;
  const double alpha = (1.0 / eta) * (1.0 - 1.0 / beta);
  auto noise = [&](std::uint64_t t) {
    return (keyed_uniform(RngKey{cfg.seed, t, replica, 0}) - 0.5) * delta;
  };

  MonteCarloResult res;
  double acc = 0.0;
  double x = cfg.x0;  // master (MW) or quantized state (Naive, ECO)
  double m = 0.0;
  if (cfg.regime != Regime::MW) {
    const double q = x + noise(0);
    x = q;
  }
  for (std::uint64_t t = 0; t < cfg.steps; ++t) {
    double xhat;
    if (cfg.regime == Regime::MW) {
      xhat = x + noise(t);
      m = beta * m + (1.0 - beta) * (L * xhat);
      x = x - eta * m;
    } else {
      xhat = x;
      const double m_tilde = beta * m + (1.0 - beta) * (L * xhat);
      const double x_tilde = xhat - eta * m_tilde;
      const double x_next = x_tilde + noise(t + 1);
      const double err = x_tilde - x_next;
      m = cfg.regime == Regime::Eco ? m_tilde + alpha * err : m_tilde;
      x = x_next;
    }
    if (!std::isfinite(xhat) || std::abs(xhat) > kDivergenceBound) {
      res.diverged = true;
      break;
    }
    if (t >= cfg.burn_in) {
      acc += xhat * xhat;
      ++res.samples;
    }
  }
  res.mean_xhat_sq = res.samples ? acc / static_cast<double>(res.samples) : 0.0;
  return res;
}

}  // namespace detail

/// Simulates the regime's exact scalar recursion on f(x) = (L/2) x^2 with
/// dither quantization and returns the post-burn-in average of x^2 as seen by
/// the model. Replicas run concurrently and are merged by sample-weighted
/// averaging in replica order.
inline MonteCarloResult monte_carlo_1d(const MonteCarloConfig& cfg) {
  if (!stability_check(cfg.L, cfg.eta, cfg.beta))
    throw DomainError("monte_carlo_1d: unstable parameters");
  if (!(cfg.delta >= 0.0)) throw DomainError("monte_carlo_1d: delta must be >= 0");
  if (cfg.steps <= cfg.burn_in) throw DomainError("monte_carlo_1d: steps must exceed burn_in");
  if (cfg.replicas == 0) throw DomainError("monte_carlo_1d: need at least one replica");

  if (cfg.replicas == 1) return detail::simulate_replica(cfg, 0);

  std::vector<std::future<MonteCarloResult>> parts;
  parts.reserve(cfg.replicas);
  for (std::uint64_t r = 0; r < cfg.replicas; ++r)
    parts.push_back(std::async(std::launch::async, detail::simulate_replica, cfg, r));

  MonteCarloResult merged;
  double weighted = 0.0;
  for (auto& f : parts) {
    const MonteCarloResult p = f.get();
    merged.diverged = merged.diverged || p.diverged;
    weighted += p.mean_xhat_sq * static_cast<double>(p.samples);
    merged.samples += p.samples;
  }
  merged.mean_xhat_sq = merged.samples ? weighted / static_cast<double>(merged.samples) : 0.0;
  return merged;
}

}  // namespace eco::theory
