#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "eco/tensor.hpp"

namespace eco::theory {

/// Constants entering the convergence bounds.
struct TheoryParams {
  double L = 1.0;       ///< smoothness
  double G = 1.0;       ///< gradient norm bound
  double sigma2 = 0.0;  ///< E|e|^2 bound (stochastic rounding)
  double delta = 0.0;   ///< |e| bound (deterministic rounding)
  double beta = 0.9;
  double eta = 0.01;
  double f_gap = 0.0;   ///< f(theta_0) - f*

  void validate() const {
    if (!(L > 0.0)) throw DomainError("L must be positive");
    if (!(G > 0.0)) throw DomainError("G must be positive");
    if (!(sigma2 >= 0.0)) throw DomainError("sigma2 must be >= 0");
    if (!(delta >= 0.0)) throw DomainError("delta must be >= 0");
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0, 1)");
    if (!(eta > 0.0)) throw DomainError("eta must be positive");
    if (!(f_gap >= 0.0)) throw DomainError("f_gap must be >= 0");
  }
};

struct Bounds {
  double alpha = 0.0;              ///< injection strength (1/eta)(1 - 1/beta)
  double C = 0.0;                  ///< eta beta / (1 - beta), virtual-point offset
  double M2_stoch = 0.0;           ///< E|m^|^2 bound under unbiased rounding
  double M_det = 0.0;              ///< pathwise |m^| bound under |e| <= delta
  double noise_floor_stoch = 0.0;  ///< sigma_quant^2
  double noise_floor_det = 0.0;    ///< Gamma_quant^2

  /// Right-hand side of the stochastic convergence bound after T steps.
  double stoch_envelope(const TheoryParams& p, double T) const {
    return 4.0 * p.f_gap / (p.eta * T) + noise_floor_stoch;
  }
  double det_envelope(const TheoryParams& p, double T) const {
    return 4.0 * p.f_gap / (p.eta * T) + noise_floor_det;
  }
};

inline Bounds bounds(const TheoryParams& p) {
  p.validate();
  const double L = p.L, G = p.G, beta = p.beta, eta = p.eta;
  Bounds b;
  b.alpha = (1.0 / eta) * (1.0 - 1.0 / beta);
  b.C = eta * beta / (1.0 - beta);
  b.M2_stoch = 2.0 * G * G + 2.0 * b.alpha * b.alpha * p.sigma2 / (1.0 - beta * beta);
  b.M_det = G + std::abs(b.alpha) * p.delta / (1.0 - beta);
  const double one_minus = 1.0 - beta;
  b.noise_floor_stoch = 4.0 * eta * eta * beta * beta * L * L * G * G / (one_minus * one_minus) +
                        4.0 * L * L * p.sigma2 / (1.0 - beta * beta);
  b.noise_floor_det = 2.0 * L * L * b.C * b.C * b.M_det * b.M_det;
  return b;
}

// ---------------------------------------------------------------------------
// One-dimensional quadratic f(x) = (L/2) x^2 under additive quantization noise
// ---------------------------------------------------------------------------

enum class Regime { MW, Naive, Eco };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::MW: return "mw";
    case Regime::Naive: return "naive";
    case Regime::Eco: return "eco";
  }
  return "?";
}

inline Regime parse_regime(std::string_view s) {
  if (s == "mw") return Regime::MW;
  if (s == "naive") return Regime::Naive;
  if (s == "eco") return Regime::Eco;
  throw std::invalid_argument("unknown regime '" + std::string(s) + "' (expected mw, naive or eco)");
}

/// Upper end of the open step-size interval for which the SGDM transition
/// matrix is a contraction.
inline double stability_limit(double L, double beta) {
  return 2.0 * (1.0 + beta) / ((1.0 - beta) * L);
}

/// 0 < eta < 2(1 + beta) / ((1 - beta) L)
inline bool stability_check(double L, double eta, double beta) {
  if (!(L > 0.0)) throw DomainError("stability_check: L must be positive");
  if (!(beta > 0.0 && beta < 1.0)) return false;
  return eta > 0.0 && eta < stability_limit(L, beta);
}

/// Constants of the linear form
///   x' = a x + b m + B1 xi,   m' = c x + d m + B2 xi.
struct RegimeCoeffs {
  double a = 0, b = 0, c = 0, d = 0, B1 = 0, B2 = 0;
};

inline RegimeCoeffs regime_coeffs(Regime regime, double L, double eta, double beta) {
  if (!stability_check(L, eta, beta))
    throw DomainError("regime_coeffs: unstable parameters (need 0 < eta < 2(1+beta)/((1-beta)L))");
  RegimeCoeffs co;
  co.c = (1.0 - beta) * L;
  co.a = 1.0 - eta * co.c;
  co.b = -eta * beta;
  co.d = beta;
  switch (regime) {
    case Regime::MW:
      co.B1 = -eta * co.c;
      co.B2 = co.c;
      break;
    case Regime::Naive:
      co.B1 = 1.0;
      co.B2 = 0.0;
      break;
    case Regime::Eco:
      co.B1 = 1.0;
      co.B2 = (1.0 - beta) / (eta * beta);  // gamma = -alpha
      break;
  }
  return co;
}

/// Largest eigenvalue modulus of [[a, b], [c, d]].
inline double spectral_radius(const RegimeCoeffs& co) {
  const std::complex<double> tr = co.a + co.d;
  const std::complex<double> det = co.a * co.d - co.b * co.c;
  const std::complex<double> disc = std::sqrt(tr * tr - 4.0 * det);
  return std::max(std::abs((tr + disc) / 2.0), std::abs((tr - disc) / 2.0));
}

/// Second moments u = E[x^2], v = E[x m], w = E[m^2].
struct RegimeMoments {
  double u = 0, v = 0, w = 0;
  bool operator==(const RegimeMoments&) const = default;
};

/// Exact propagation of (u, v, w) through one step of the linear form with
/// independent zero-mean noise of variance sigma2.
inline RegimeMoments moment_step(const RegimeMoments& s, const RegimeCoeffs& co, double sigma2) {
  const double a = co.a, b = co.b, c = co.c, d = co.d;
  return {
      a * a * s.u + 2.0 * a * b * s.v + b * b * s.w + co.B1 * co.B1 * sigma2,
      a * c * s.u + (a * d + b * c) * s.v + b * d * s.w + co.B1 * co.B2 * sigma2,
      c * c * s.u + 2.0 * c * d * s.v + d * d * s.w + co.B2 * co.B2 * sigma2,
  };
}

/// Stationary point of moment_step, found by iterating from zero until the
/// geometric tail estimate drops below `rel_tol`.
inline RegimeMoments iterate_moments(const RegimeCoeffs& co, double sigma2, double rel_tol = 1e-13,
                                     std::uint64_t max_iter = 2'000'000'000ULL) {
  const double rho = spectral_radius(co);
  if (!(rho < 1.0)) throw DomainError("iterate_moments: transition matrix is not a contraction");
  const double r = rho * rho;
  const double tail = r / (1.0 - r);
  const double eps = std::numeric_limits<double>::epsilon();
  RegimeMoments s{};
  for (std::uint64_t k = 0; k < max_iter; ++k) {
    const RegimeMoments n = moment_step(s, co, sigma2);
    // Each moment is held to its own scale; |v| <= sqrt(u w) sets the scale of v.
    // Steps below a few ulps cannot improve the iterate further.
    const auto settled = [&](double prev, double next, double scale) {
      const double step = std::abs(next - prev);
      return step * tail <= rel_tol * scale || step <= 8.0 * eps * scale;
    };
    const bool done = settled(s.u, n.u, std::abs(n.u)) && settled(s.w, n.w, std::abs(n.w)) &&
                      settled(s.v, n.v, std::sqrt(std::abs(n.u * n.w)));
    const bool zero = n.u == 0.0 && n.v == 0.0 && n.w == 0.0;
    s = n;
    if (k > 0 && (done || zero)) return s;
  }
  throw std::runtime_error("iterate_moments: no convergence");
}

/// Closed-form stationary E[x^2] of the regime state variable. For MW this is
/// the master weight; the model sees x + xi, see stationary_grad_sq.
inline double closed_form_u(Regime regime, double L, double eta, double beta, double sigma2) {
  const double Le = L * eta;
  switch (regime) {
    case Regime::MW:
      return Le * sigma2 * (1.0 + beta) / (2.0 * (1.0 + beta) - Le * (1.0 - beta));
    case Regime::Naive:
      return sigma2 * ((1.0 - beta * beta) + 2.0 * beta * Le) /
             (Le * (2.0 * (1.0 - beta * beta) - Le * (1.0 - beta) * (1.0 - beta)));
    case Regime::Eco:
      return 2.0 * sigma2 / (2.0 * (1.0 - beta * beta) - Le * (1.0 - beta) * (1.0 - beta));
  }
  return 0.0;
}

/// Closed-form (u, v, w): u from closed_form_u, then (v, w) from the v- and
/// w-equations of the stationary system (their 2x2 determinant is positive
/// on the whole stable region).
inline RegimeMoments closed_form_moments(Regime regime, double L, double eta, double beta, double sigma2) {
  const RegimeCoeffs co = regime_coeffs(regime, L, eta, beta);
  const double u = closed_form_u(regime, L, eta, beta, sigma2);
  const double a = co.a, b = co.b, c = co.c, d = co.d;
  // [1 - ad - bc, -bd; -2cd, 1 - d^2] [v; w] = [ac u + B1 B2 s2; c^2 u + B2^2 s2]
  const double p11 = 1.0 - a * d - b * c, p12 = -b * d;
  const double p21 = -2.0 * c * d, p22 = 1.0 - d * d;
  const double r1 = a * c * u + co.B1 * co.B2 * sigma2;
  const double r2 = c * c * u + co.B2 * co.B2 * sigma2;
  const double det = p11 * p22 - p12 * p21;
  return {u, (r1 * p22 - p12 * r2) / det, (p11 * r2 - p21 * r1) / det};
}

/// Stationary moments computed two ways, closed form and fixed-point
/// iteration, which must agree to `agree_tol` (relative to the moment scale).
/// Returns the closed form.
inline RegimeMoments stationary_moments(Regime regime, double L, double eta, double beta, double sigma2,
                                        double agree_tol = 1e-9) {
  if (!(sigma2 >= 0.0)) throw DomainError("stationary_moments: sigma2 must be >= 0");
  const RegimeCoeffs co = regime_coeffs(regime, L, eta, beta);
  const RegimeMoments closed = closed_form_moments(regime, L, eta, beta, sigma2);
  const RegimeMoments iter = iterate_moments(co, sigma2);
  const double scale = std::max({1e-300, std::abs(closed.u), std::abs(closed.v), std::abs(closed.w)});
  const double gap = std::max({std::abs(closed.u - iter.u), std::abs(closed.v - iter.v),
                               std::abs(closed.w - iter.w)});
  if (gap > agree_tol * scale)
    throw std::logic_error("stationary_moments: closed form and iteration disagree for regime " +
                           std::string(to_string(regime)));
  return closed;
}

/// Stationary E[f'(x^)^2] where x^ is what the model evaluates. MW sees the
/// master plus fresh noise (u + sigma2); Naive and ECO store x^ directly.
inline double stationary_grad_sq(Regime regime, double L, double eta, double beta, double sigma2) {
  const RegimeMoments m = stationary_moments(regime, L, eta, beta, sigma2);
  return regime == Regime::MW ? L * L * (m.u + sigma2) : L * L * m.u;
}

/// Stationary E[x^2] as seen by the model (stationary_grad_sq / L^2).
inline double stationary_model_sq(Regime regime, double L, double eta, double beta, double sigma2) {
  return stationary_grad_sq(regime, L, eta, beta, sigma2) / (L * L);
}

}  // namespace eco::theory
