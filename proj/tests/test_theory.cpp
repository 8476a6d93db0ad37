#include <array>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "eco/memory.hpp"
#include "eco/monte_carlo.hpp"
#include "eco/theory.hpp"
#include "eco/train_step.hpp"
#include "eco/virtual_sequence.hpp"

namespace {

using eco::Tensor;
using eco::theory::Regime;
using eco::theory::RegimeMoments;

constexpr std::array<Regime, 3> kRegimes{Regime::MW, Regime::Naive, Regime::Eco};

// Stationary (u, v, w) from the linear system s = A s + b, solved by Gaussian
// elimination with partial pivoting. Built from the linear-form coefficients
// written out here, not from the library's moment update.
RegimeMoments solve_stationary(Regime r, double L, double eta, double beta, double s2) {
  const double c = (1 - beta) * L, a = 1 - eta * c, b = -eta * beta, d = beta;
  double B1 = 1, B2 = 0;
  if (r == Regime::MW) B1 = -eta * c, B2 = c;
  if (r == Regime::Eco) B2 = (1 - beta) / (eta * beta);
  double M[3][4] = {{1 - a * a, -2 * a * b, -b * b, B1 * B1 * s2},
                    {-a * c, 1 - (a * d + b * c), -b * d, B1 * B2 * s2},
                    {-c * c, -2 * c * d, 1 - d * d, B2 * B2 * s2}};
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int row = col + 1; row < 3; ++row)
      if (std::abs(M[row][col]) > std::abs(M[piv][col])) piv = row;
    for (int k = 0; k < 4; ++k) std::swap(M[col][k], M[piv][k]);
    for (int row = 0; row < 3; ++row) {
      if (row == col) continue;
      const double f = M[row][col] / M[col][col];
      for (int k = 0; k < 4; ++k) M[row][k] -= f * M[col][k];
    }
  }
  return {M[0][3] / M[0][0], M[1][3] / M[1][1], M[2][3] / M[2][2]};
}

// Diagonal quadratic used to produce short trajectories.
struct Quad {
  std::vector<double> h;
  Tensor grad(const Tensor& x) const {
    Tensor g = x;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= h[i];
    return g;
  }
  double value(const Tensor& x) const {
    double f = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) f += 0.5 * h[i] * x[i] * x[i];
    return f;
  }
  eco::Evaluation operator()(const std::vector<Tensor>& w) const { return {value(w[0]), {grad(w[0])}}; }
};

Quad quad(std::size_t d, double lo, double hi) {
  Quad q{std::vector<double>(d)};
  for (std::size_t i = 0; i < d; ++i) q.h[i] = lo + (hi - lo) * double(i) / double(d - 1);
  return q;
}

struct Traj {
  std::vector<Tensor> theta, m, g;
};

Traj run(const Quad& f, eco::Mode mode, const eco::QuantSpec& q, double eta, double beta, std::uint64_t steps) {
  eco::Hyper h;
  h.eta = eta;
  h.beta1 = beta;
  Tensor x0({f.h.size()});
  for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = 2.0 * std::cos(0.9 * double(i) + 0.3);
  std::vector<eco::ParamGroup> groups{eco::make_group("w", 0, x0, eco::OptimizerKind::Sgdm, mode, q, h, 4)};
  Traj t;
  t.theta.push_back(groups[0].weights);
  t.m.push_back(eco::momentum(groups[0]));
  for (std::uint64_t s = 0; s < steps; ++s) {
    t.g.push_back(f.grad(groups[0].weights));
    eco::train_step(groups, f, h, 4, s);
    t.theta.push_back(groups[0].weights);
    t.m.push_back(eco::momentum(groups[0]));
  }
  return t;
}

TEST(VirtualPoint, Examples) {
  const Tensor th = Tensor::vector({2.0, -1.0});
  EXPECT_EQ(eco::theory::virtual_point(th, Tensor::zeros_like(th), 0.3, 0.9), th);
  EXPECT_DOUBLE_EQ(eco::theory::virtual_point(Tensor::scalar(2.0), Tensor::scalar(1.0), 0.5, 0.5)[0], 1.5);
  const Tensor m = Tensor::vector({0.4, 0.1}), m2 = Tensor::vector({-1.0, 2.0});
  const double C = 0.1 * 0.9 / 0.1;
  const Tensor lhs = eco::theory::virtual_point(th, m + m2, 0.1, 0.9);
  const Tensor rhs = eco::theory::virtual_point(th, m, 0.1, 0.9) - C * m2;
  EXPECT_LE(eco::max_abs_diff(lhs, rhs), 1e-14);
  EXPECT_THROW(eco::theory::virtual_point(th, m, 0.1, 1.0), eco::DomainError);
}

TEST(VirtualDynamics, IdentityGridIsExact) {
  const Quad f = quad(10, 0.1, 1.0);
  const Traj t = run(f, eco::Mode::Eco, eco::identity_spec(), 0.1, 0.9, 100);
  EXPECT_LE(eco::theory::check_virtual_dynamics(t.theta, t.m, t.g, 0.1, 0.9).max_inf, 1e-12);
}

TEST(VirtualDynamics, EcoCancelsQuantizationError) {
  const Quad f = quad(10, 0.1, 1.0);
  const Traj t = run(f, eco::Mode::Eco, eco::fixed_step_spec(0.05), 0.1, 0.9, 1000);
  EXPECT_LE(eco::theory::check_virtual_dynamics(t.theta, t.m, t.g, 0.1, 0.9).max_inf, 1e-10);
}

TEST(VirtualDynamics, NaiveDoesNotCancel) {
  const Quad f = quad(10, 0.1, 1.0);
  const Traj t = run(f, eco::Mode::Naive, eco::fixed_step_spec(0.05), 0.1, 0.9, 1000);
  EXPECT_GT(eco::theory::check_virtual_dynamics(t.theta, t.m, t.g, 0.1, 0.9).max_inf, 1e-3);
}

TEST(VirtualDynamics, LengthMismatch) {
  std::vector<Tensor> th(3, Tensor::scalar(0.0)), m(2, Tensor::scalar(0.0)), g(2, Tensor::scalar(0.0));
  EXPECT_THROW(eco::theory::check_virtual_dynamics(th, m, g, 0.1, 0.9), eco::ShapeError);
}

TEST(Bounds, NoQuantizationDegeneration) {
  eco::theory::TheoryParams p;
  p.G = 1.7;
  const auto b = eco::theory::bounds(p);
  EXPECT_DOUBLE_EQ(b.M2_stoch, 2.0 * 1.7 * 1.7);
  EXPECT_DOUBLE_EQ(b.M_det, 1.7);
}

TEST(Bounds, HandExamples) {
  eco::theory::TheoryParams p;
  p.L = 1, p.G = 1, p.sigma2 = 1, p.beta = 0.5, p.eta = 0.1;
  EXPECT_NEAR(eco::theory::bounds(p).noise_floor_stoch, 0.04 + 4.0 / 0.75, 1e-12);

  p.eta = 0.5, p.sigma2 = 0.01;
  const auto b = eco::theory::bounds(p);
  EXPECT_DOUBLE_EQ(b.alpha, -2.0);
  EXPECT_NEAR(b.M2_stoch, 2.0 + 2.0 * 4.0 * 0.01 / 0.75, 1e-12);

  p.L = 2, p.G = 1.5, p.delta = 0.1, p.beta = 0.9, p.eta = 0.05;
  const auto d = eco::theory::bounds(p);
  const double alpha = (1 / 0.05) * (1 - 1 / 0.9), C = 0.05 * 0.9 / 0.1;
  const double Mdet = 1.5 + std::abs(alpha) * 0.1 / 0.1;
  EXPECT_NEAR(d.M_det, Mdet, 1e-12);
  EXPECT_NEAR(d.noise_floor_det, 2 * 4 * C * C * Mdet * Mdet, 1e-10);
}

TEST(Stability, Examples) {
  EXPECT_TRUE(eco::theory::stability_check(1.0, 0.1, 0.9));
  EXPECT_NEAR(eco::theory::stability_limit(1.0, 0.9), 38.0, 1e-12);
  EXPECT_FALSE(eco::theory::stability_check(1.0, eco::theory::stability_limit(1.0, 0.5), 0.5));
  EXPECT_FALSE(eco::theory::stability_check(10.0, 1.0, 0.5));
  EXPECT_NEAR(eco::theory::stability_limit(10.0, 0.5), 0.6, 1e-15);
  EXPECT_FALSE(eco::theory::stability_check(1.0, 0.0, 0.5));
}

TEST(RegimeCoeffs, Examples) {
  const auto e = eco::theory::regime_coeffs(Regime::Eco, 1.0, 0.1, 0.5);
  EXPECT_DOUBLE_EQ(e.c, 0.5);
  EXPECT_DOUBLE_EQ(e.a, 0.95);
  EXPECT_DOUBLE_EQ(e.b, -0.05);
  EXPECT_DOUBLE_EQ(e.d, 0.5);
  EXPECT_DOUBLE_EQ(e.B1, 1.0);
  EXPECT_NEAR(e.B2, 10.0, 1e-12);
  const auto m = eco::theory::regime_coeffs(Regime::MW, 1.0, 0.1, 0.5);
  EXPECT_DOUBLE_EQ(m.B1, -0.05);
  EXPECT_DOUBLE_EQ(m.B2, 0.5);
  EXPECT_EQ(eco::theory::regime_coeffs(Regime::Naive, 3.0, 0.2, 0.7).B2, 0.0);
  EXPECT_THROW(eco::theory::regime_coeffs(Regime::Eco, 10.0, 1.0, 0.5), eco::DomainError);
  EXPECT_LT(eco::theory::spectral_radius(e), 1.0);
}

TEST(MomentStep, Examples) {
  const auto co = eco::theory::regime_coeffs(Regime::Eco, 1.0, 0.1, 0.5);
  EXPECT_EQ(eco::theory::moment_step({0, 0, 0}, co, 0.0), (RegimeMoments{0, 0, 0}));
  const RegimeMoments one = eco::theory::moment_step({0, 0, 0}, co, 1.0);
  EXPECT_NEAR(one.u, 1.0, 1e-15);
  EXPECT_NEAR(one.v, 10.0, 1e-12);
  EXPECT_NEAR(one.w, 100.0, 1e-10);
}

TEST(MomentStep, IterationConvergesToStationary) {
  for (Regime r : kRegimes) {
    const auto co = eco::theory::regime_coeffs(r, 1.0, 0.1, 0.5);
    RegimeMoments s{};
    for (int k = 0; k < 100000; ++k) s = eco::theory::moment_step(s, co, 1.0);
    const RegimeMoments ref = eco::theory::stationary_moments(r, 1.0, 0.1, 0.5, 1.0);
    EXPECT_NEAR(s.u, ref.u, 1e-10);
    EXPECT_NEAR(s.v, ref.v, 1e-10);
    EXPECT_NEAR(s.w, ref.w, 1e-10);
  }
}

TEST(StationaryMoments, HandValues) {
  EXPECT_NEAR(eco::theory::stationary_moments(Regime::MW, 1, 0.1, 0.5, 1).u, 0.15 / 2.95, 1e-14);
  EXPECT_NEAR(eco::theory::stationary_moments(Regime::Eco, 1, 0.1, 0.5, 1).u, 2 / 1.475, 1e-13);
  EXPECT_NEAR(eco::theory::stationary_moments(Regime::Naive, 1, 0.1, 0.5, 1).u, 0.85 / 0.1475, 1e-12);
}

TEST(StationaryMoments, MatchLinearSolveOnGrid) {
  // 100 stable (eta, beta) points across all three regimes.
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const double eta = 0.02 + 0.05 * i, beta = 0.05 + 0.09 * j, L = 1.3, s2 = 0.7;
      ASSERT_TRUE(eco::theory::stability_check(L, eta, beta));
      for (Regime r : kRegimes) {
        const RegimeMoments ref = solve_stationary(r, L, eta, beta, s2);
        const double cf = eco::theory::closed_form_u(r, L, eta, beta, s2);
        const RegimeMoments it = eco::theory::iterate_moments(eco::theory::regime_coeffs(r, L, eta, beta), s2);
        const RegimeMoments st = eco::theory::stationary_moments(r, L, eta, beta, s2);
        const double tol = 1e-10 * std::max(1.0, std::abs(ref.w));
        EXPECT_NEAR(cf, ref.u, 1e-10) << eta << ' ' << beta;
        EXPECT_NEAR(it.u, ref.u, 1e-10) << eta << ' ' << beta;
        EXPECT_NEAR(st.v, ref.v, tol);
        EXPECT_NEAR(st.w, ref.w, tol);
        EXPECT_LE(st.v * st.v, st.u * st.w * (1 + 1e-12));
      }
    }
}

TEST(StationaryMoments, RejectsUnstable) {
  EXPECT_THROW(eco::theory::stationary_moments(Regime::Eco, 10.0, 1.0, 0.5, 1.0), eco::DomainError);
}

TEST(StationaryGradSq, MwSeesFreshNoise) {
  EXPECT_NEAR(eco::theory::stationary_grad_sq(Regime::MW, 1, 0.1, 0.5, 1), 1.0 + 0.15 / 2.95, 1e-13);
  EXPECT_NEAR(eco::theory::stationary_grad_sq(Regime::Eco, 2, 0.1, 0.5, 1),
              4 * eco::theory::closed_form_u(Regime::Eco, 2, 0.1, 0.5, 1), 1e-12);
}

TEST(StationaryGradSq, EcoNoiseFloorLimit) {
  EXPECT_NEAR(eco::theory::stationary_grad_sq(Regime::Eco, 1, 1e-3, 0.5, 1), 1 / 0.75, 1e-3 / 0.75);
  for (double beta : {0.5, 0.9}) {
    const double limit = 1.0 / (1 - beta * beta);
    EXPECT_NEAR(eco::theory::stationary_grad_sq(Regime::Eco, 1, 1e-4, beta, 1), limit, 5e-3 * limit);
  }
}

TEST(StationaryGradSq, NaiveInverseEtaLaw) {
  const double a = eco::theory::stationary_grad_sq(Regime::Naive, 1, 1e-3, 0.5, 1);
  const double b = eco::theory::stationary_grad_sq(Regime::Naive, 1, 5e-4, 0.5, 1);
  EXPECT_NEAR(b / a, 2.0, 0.02);
  for (double L : {1.0, 2.5}) {
    const double eta = 1e-4, s2 = 0.3;
    const double scaled = eco::theory::stationary_grad_sq(Regime::Naive, L, eta, 0.5, s2) * eta;
    EXPECT_NEAR(scaled, s2 * L / 2, 0.05 * s2 * L / 2);
  }
}

TEST(MonteCarlo, NoiselessDecay) {
  for (Regime r : kRegimes) {
    eco::theory::MonteCarloConfig c;
    c.regime = r;
    c.delta = 0.0;
    c.steps = 20000;
    c.burn_in = 19000;
    EXPECT_LE(eco::theory::monte_carlo_1d(c).mean_xhat_sq, 1e-20);
  }
}

TEST(MonteCarlo, MatchesClosedForm) {
  const double delta = std::sqrt(12.0);
  for (Regime r : kRegimes) {
    eco::theory::MonteCarloConfig c;
    c.regime = r;
    c.L = 1;
    c.eta = 0.1;
    c.beta = 0.5;
    c.delta = delta;
    c.steps = 10'000'000;
    c.burn_in = 2'000'000;
    c.seed = 12;
    const auto res = eco::theory::monte_carlo_1d(c);
    EXPECT_FALSE(res.diverged);
    const double ref = eco::theory::stationary_model_sq(r, 1, 0.1, 0.5, eco::theory::noise_variance(delta));
    EXPECT_NEAR(res.mean_xhat_sq, ref, 0.03 * ref) << eco::theory::to_string(r);
  }
}

TEST(MonteCarlo, ReplicaMergeIsDeterministic) {
  eco::theory::MonteCarloConfig c;
  c.steps = 200000;
  c.burn_in = 40000;
  c.replicas = 4;
  const auto a = eco::theory::monte_carlo_1d(c);
  const auto b = eco::theory::monte_carlo_1d(c);
  EXPECT_EQ(a.mean_xhat_sq, b.mean_xhat_sq);
  EXPECT_EQ(a.samples, 4u * 160000u);
}

TEST(MonteCarlo, RejectsBadConfig) {
  eco::theory::MonteCarloConfig c;
  c.eta = 100.0;
  EXPECT_THROW(eco::theory::monte_carlo_1d(c), eco::DomainError);
  c.eta = 0.1;
  c.burn_in = c.steps;
  EXPECT_THROW(eco::theory::monte_carlo_1d(c), eco::DomainError);
}

TEST(DescentInequality, HoldsPathwiseOnShortRun) {
  const Quad f = quad(10, 0.2, 2.0);
  const double L = 2.0, eta = 1 / (4 * L), beta = 0.9, C = eta * beta / (1 - beta);
  for (eco::Rounding rd : {eco::Rounding::RTN, eco::Rounding::SR}) {
    const Traj t = run(f, eco::Mode::Eco, eco::fixed_step_spec(0.05, rd), eta, beta, 2000);
    for (std::size_t s = 0; s + 1 < t.theta.size(); ++s) {
      const double lhs = f.value(eco::theory::virtual_point(t.theta[s + 1], t.m[s + 1], eta, beta));
      const double rhs = f.value(eco::theory::virtual_point(t.theta[s], t.m[s], eta, beta)) -
                         eta / 4 * eco::norm_sq(t.g[s]) + eta * L * L * C * C / 2 * eco::norm_sq(t.m[s]);
      ASSERT_LE(lhs, rhs + 1e-9) << "step " << s;
    }
  }
}

TEST(DeterministicMomentumBound, HoldsOnShortRun) {
  const std::size_t d = 10;
  const Quad f = quad(d, 0.1, 1.0);
  const double eta = 0.05, beta = 0.9, delta_q = 0.05;
  const Traj t = run(f, eco::Mode::Eco, eco::fixed_step_spec(delta_q), eta, beta, 5000);
  double G = 0.0;
  for (const Tensor& g : t.g) G = std::max(G, eco::norm(g));
  eco::theory::TheoryParams p;
  p.G = G, p.beta = beta, p.eta = eta, p.delta = delta_q * std::sqrt(double(d)) / 2;
  const double Mdet = eco::theory::bounds(p).M_det;
  for (const Tensor& m : t.m) ASSERT_LE(eco::norm(m), Mdet);
}

TEST(Memory, ByteAccounting) {
  using eco::StorageFormat;
  EXPECT_EQ(eco::memory_bytes_per_param(StorageFormat::Fp8, StorageFormat::Fp32, StorageFormat::Fp32, StorageFormat::Fp32), 13.0);
  EXPECT_EQ(eco::memory_bytes_per_param(StorageFormat::None, StorageFormat::Fp32, StorageFormat::Fp32, StorageFormat::Fp32), 12.0);
  EXPECT_EQ(eco::memory_bytes_per_param(StorageFormat::Fp8, std::nullopt, StorageFormat::Fp32, StorageFormat::Fp32), 9.0);
  EXPECT_EQ(eco::memory_bytes_per_param(StorageFormat::Fp32, std::nullopt, StorageFormat::None, std::nullopt), 4.0);
  EXPECT_EQ(eco::memory_bytes_per_param(StorageFormat::Int4, StorageFormat::Bf16, StorageFormat::Fp8, std::nullopt), 3.5);
  EXPECT_THROW(eco::parse_storage_format("fp16"), std::invalid_argument);
}

}  // namespace
