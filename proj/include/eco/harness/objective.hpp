#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "eco/random.hpp"
#include "eco/tensor.hpp"
#include "eco/train_step.hpp"

namespace eco::harness {

/// f(x) = (L/2) x^2
struct Quadratic1D {
  double L = 1.0;
};

/// f(theta) = 1/2 theta^T H theta, H symmetric positive semidefinite (d x d).
struct QuadraticND {
  Tensor H;
};

/// f(theta) = 1/(2n) |X theta - y|^2, X is n x d.
struct LinearRegression {
  Tensor X;
  Tensor y;
};

/// Regression MLP in -> hidden -> hidden -> out with tanh activations and
/// loss 1/(2n) sum |y^ - y|^2. Parameters, in order:
/// W_in, b_in, W_mid, b_mid, W_out, b_out. W_mid/b_mid form the interior
/// block; the rest are the input and output layers.
struct Mlp2 {
  std::size_t in = 1, hidden = 1, out = 1;
  Tensor X;  ///< n x in
  Tensor Y;  ///< n x out
};

using ObjectiveKind = std::variant<Quadratic1D, QuadraticND, LinearRegression, Mlp2>;

struct ParamInfo {
  std::string name;
  Shape shape;
  bool io = false;  ///< input/output layer, excluded from quantization unless requested
};

class Objective {
 public:
  explicit Objective(ObjectiveKind kind) : kind_(std::move(kind)) { validate(); }

  const ObjectiveKind& kind() const { return kind_; }

  std::vector<ParamInfo> layout() const {
    return std::visit(
        [](const auto& o) -> std::vector<ParamInfo> {
          using O = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<O, Quadratic1D>) {
            return {{"theta", {1}, false}};
          } else if constexpr (std::is_same_v<O, QuadraticND>) {
            return {{"theta", {o.H.shape()[0]}, false}};
          } else if constexpr (std::is_same_v<O, LinearRegression>) {
            return {{"theta", {o.X.shape()[1]}, false}};
          } else {
            return {{"W_in", {o.hidden, o.in}, true},      {"b_in", {o.hidden}, true},
                    {"W_mid", {o.hidden, o.hidden}, false}, {"b_mid", {o.hidden}, false},
                    {"W_out", {o.out, o.hidden}, true},     {"b_out", {o.out}, true}};
          }
        },
        kind_);
  }

  /// Number of data rows, 0 for the quadratics.
  std::size_t sample_count() const {
    if (const auto* lr = std::get_if<LinearRegression>(&kind_)) return lr->X.shape()[0];
    if (const auto* m = std::get_if<Mlp2>(&kind_)) return m->X.shape()[0];
    return 0;
  }

  /// Exact value and gradient. A non-empty `rows` restricts data-backed
  /// objectives to those samples (the loss is then the mean over `rows`);
  /// quadratics ignore it.
  Evaluation evaluate(const std::vector<Tensor>& params, std::span<const std::size_t> rows = {}) const {
    const auto info = layout();
    if (params.size() != info.size())
      throw ShapeError("objective: expected " + std::to_string(info.size()) + " parameter tensors");
    for (std::size_t i = 0; i < info.size(); ++i)
      if (params[i].shape() != info[i].shape)
        throw ShapeError("objective: parameter '" + info[i].name + "' has shape " +
                         shape_string(params[i].shape()) + ", expected " + shape_string(info[i].shape));
    const std::size_t n = sample_count();
    for (std::size_t r : rows)
      if (r >= n) throw ShapeError("objective: sample index " + std::to_string(r) + " out of range");
    std::vector<std::size_t> all;
    if (rows.empty()) {
      all.resize(n);
      for (std::size_t i = 0; i < n; ++i) all[i] = i;
      rows = all;
    }
    return std::visit([&](const auto& o) { return eval(o, params, rows); }, kind_);
  }

  double value(const std::vector<Tensor>& params) const { return evaluate(params).loss; }

 private:
  void validate() const {
    std::visit(
        [](const auto& o) {
          using O = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<O, Quadratic1D>) {
            if (!(o.L >= 0.0)) throw DomainError("Quadratic1D: L must be >= 0");
          } else if constexpr (std::is_same_v<O, QuadraticND>) {
            const auto& s = o.H.shape();
            if (s.size() != 2 || s[0] != s[1]) throw ShapeError("QuadraticND: H must be square");
            const std::size_t d = s[0];
            for (std::size_t i = 0; i < d; ++i)
              for (std::size_t j = 0; j < i; ++j)
                if (std::abs(o.H[i * d + j] - o.H[j * d + i]) > 1e-12 * (1.0 + std::abs(o.H[i * d + j])))
                  throw DomainError("QuadraticND: H must be symmetric");
          } else if constexpr (std::is_same_v<O, LinearRegression>) {
            if (o.X.shape().size() != 2) throw ShapeError("LinearRegression: X must be a matrix");
            if (o.y.size() != o.X.shape()[0]) throw ShapeError("LinearRegression: y length != rows of X");
          } else {
            if (o.in == 0 || o.hidden == 0 || o.out == 0) throw ShapeError("Mlp2: dims must be positive");
            if (o.X.shape() != Shape{o.X.size() / o.in, o.in}) throw ShapeError("Mlp2: X must be n x in");
            if (o.Y.shape() != Shape{o.X.shape()[0], o.out}) throw ShapeError("Mlp2: Y must be n x out");
          }
        },
        kind_);
  }

  static Evaluation eval(const Quadratic1D& o, const std::vector<Tensor>& p, std::span<const std::size_t>) {
    const double x = p[0][0];
    return {0.5 * o.L * x * x, {Tensor::scalar(o.L * x)}};
  }

  static Evaluation eval(const QuadraticND& o, const std::vector<Tensor>& p, std::span<const std::size_t>) {
    const Tensor& th = p[0];
    const std::size_t d = th.size();
    Tensor g(th.shape());
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += o.H[i * d + j] * th[j];
      g[i] = acc;
    }
    return {0.5 * dot(th, g), {std::move(g)}};
  }

  static Evaluation eval(const LinearRegression& o, const std::vector<Tensor>& p,
                         std::span<const std::size_t> rows) {
    const Tensor& th = p[0];
    const std::size_t n = rows.size(), d = o.X.shape()[1];
    Tensor g(th.shape());
    double loss = 0.0;
    for (std::size_t r : rows) {
      double pred = 0.0;
      for (std::size_t j = 0; j < d; ++j) pred += o.X[r * d + j] * th[j];
      const double res = pred - o.y[r];
      loss += res * res;
      for (std::size_t j = 0; j < d; ++j) g[j] += res * o.X[r * d + j];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& v : g) v *= inv_n;
    return {0.5 * loss * inv_n, {std::move(g)}};
  }

  static Evaluation eval(const Mlp2& o, const std::vector<Tensor>& p, std::span<const std::size_t> rows) {
    const Tensor &W1 = p[0], &b1 = p[1], &W2 = p[2], &b2 = p[3], &W3 = p[4], &b3 = p[5];
    const std::size_t n = rows.size(), in = o.in, h = o.hidden, out = o.out;
    std::vector<Tensor> g;
    for (const Tensor& t : p) g.push_back(Tensor::zeros_like(t));
    std::vector<double> a1(h), a2(h), d1(h), d2(h), d3(out);
    double loss = 0.0;
    for (std::size_t s : rows) {
      const double* x = o.X.values().data() + s * in;
      for (std::size_t i = 0; i < h; ++i) {
        double z = b1[i];
        for (std::size_t j = 0; j < in; ++j) z += W1[i * in + j] * x[j];
        a1[i] = std::tanh(z);
      }
      for (std::size_t i = 0; i < h; ++i) {
        double z = b2[i];
        for (std::size_t j = 0; j < h; ++j) z += W2[i * h + j] * a1[j];
        a2[i] = std::tanh(z);
      }
      for (std::size_t k = 0; k < out; ++k) {
        double z = b3[k];
        for (std::size_t j = 0; j < h; ++j) z += W3[k * h + j] * a2[j];
        d3[k] = z - o.Y[s * out + k];
        loss += d3[k] * d3[k];
      }
      // Backward pass.
      for (std::size_t k = 0; k < out; ++k) {
        g[5][k] += d3[k];
        for (std::size_t j = 0; j < h; ++j) g[4][k * h + j] += d3[k] * a2[j];
      }
      for (std::size_t j = 0; j < h; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < out; ++k) acc += W3[k * h + j] * d3[k];
        d2[j] = acc * (1.0 - a2[j] * a2[j]);
      }
      for (std::size_t i = 0; i < h; ++i) {
        g[3][i] += d2[i];
        for (std::size_t j = 0; j < h; ++j) g[2][i * h + j] += d2[i] * a1[j];
      }
      for (std::size_t j = 0; j < h; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < h; ++i) acc += W2[i * h + j] * d2[i];
        d1[j] = acc * (1.0 - a1[j] * a1[j]);
      }
      for (std::size_t i = 0; i < h; ++i) {
        g[1][i] += d1[i];
        for (std::size_t j = 0; j < in; ++j) g[0][i * in + j] += d1[i] * x[j];
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Tensor& t : g)
      for (double& v : t) v *= inv_n;
    return {0.5 * loss * inv_n, std::move(g)};
  }

  ObjectiveKind kind_;
};

/// Single-tensor convenience: (f, grad f) at theta.
inline std::pair<double, Tensor> objective_eval(const Objective& obj, const Tensor& theta) {
  Evaluation e = obj.evaluate({theta});
  return {e.loss, std::move(e.grads.front())};
}

// ---------------------------------------------------------------------------
// Seeded generators
// ---------------------------------------------------------------------------

/// Tensor of i.i.d. N(0, scale^2) draws from stream (seed, stream, id).
inline Tensor gaussian_tensor(Shape shape, double scale, std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t id = 0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * keyed_normal(RngKey{seed, stream, id, i});
  return t;
}

/// H = Q diag(eigenvalues) Q^T with Q a seeded random orthogonal matrix
/// (Gram-Schmidt on a Gaussian matrix). With rotate = false, H is diagonal.
inline Tensor psd_matrix(const std::vector<double>& eigenvalues, std::uint64_t seed, bool rotate = true) {
  const std::size_t d = eigenvalues.size();
  if (d == 0) throw ShapeError("psd_matrix: need at least one eigenvalue");
  for (double e : eigenvalues)
    if (!(e >= 0.0)) throw DomainError("psd_matrix: eigenvalues must be >= 0");
  Tensor Q({d, d});
  if (!rotate) {
    for (std::size_t i = 0; i < d; ++i) Q[i * d + i] = 1.0;
  } else {
    Tensor A = gaussian_tensor({d, d}, 1.0, seed, 0x9511);
    // Columns of Q are orthonormalised columns of A.
    for (std::size_t c = 0; c < d; ++c) {
      std::vector<double> col(d);
      for (std::size_t r = 0; r < d; ++r) col[r] = A[r * d + c];
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t k = 0; k < c; ++k) {
          double proj = 0.0;
          for (std::size_t r = 0; r < d; ++r) proj += col[r] * Q[r * d + k];
          for (std::size_t r = 0; r < d; ++r) col[r] -= proj * Q[r * d + k];
        }
      double nrm = 0.0;
      for (double v : col) nrm += v * v;
      nrm = std::sqrt(nrm);
      for (std::size_t r = 0; r < d; ++r) Q[r * d + c] = col[r] / nrm;
    }
  }
  Tensor H({d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += Q[i * d + k] * eigenvalues[k] * Q[j * d + k];
      H[i * d + j] = acc;
      H[j * d + i] = acc;
    }
  return H;
}

/// Evenly spaced eigenvalues from lo to hi inclusive.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = n == 1 ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

inline LinearRegression make_linear_regression(std::size_t samples, std::size_t dim, double noise,
                                               std::uint64_t seed) {
  Tensor X = gaussian_tensor({samples, dim}, 1.0, seed, 0x11);
  Tensor w = gaussian_tensor({dim}, 1.0, seed, 0x12);
  Tensor y({samples});
  for (std::size_t r = 0; r < samples; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) acc += X[r * dim + j] * w[j];
    y[r] = acc + noise * keyed_normal(RngKey{seed, 0x13, 0, r});
  }
  return {std::move(X), std::move(y)};
}

/// Default MLP initialisation: weights N(0, 1/fan_in), zero biases.
inline std::vector<Tensor> mlp2_init(std::size_t in, std::size_t hidden, std::size_t out,
                                     std::uint64_t seed, std::uint64_t stream = 0x21) {
  return {gaussian_tensor({hidden, in}, 1.0 / std::sqrt(static_cast<double>(in)), seed, stream, 0),
          Tensor({hidden}),
          gaussian_tensor({hidden, hidden}, 1.0 / std::sqrt(static_cast<double>(hidden)), seed, stream, 2),
          Tensor({hidden}),
          gaussian_tensor({out, hidden}, 1.0 / std::sqrt(static_cast<double>(hidden)), seed, stream, 4),
          Tensor({out})};
}

/// Synthetic regression data: Gaussian inputs, targets from a seeded teacher
/// network of the same architecture plus Gaussian label noise.
inline Mlp2 make_mlp2(std::size_t in, std::size_t hidden, std::size_t out, std::size_t samples, double noise,
                      std::uint64_t seed) {
  Mlp2 m{in, hidden, out, gaussian_tensor({samples, in}, 1.0, seed, 0x31), Tensor({samples, out})};
  std::vector<Tensor> teacher = mlp2_init(in, hidden, out, seed, 0x32);
  // Give the teacher non-trivial biases so targets are not centred.
  teacher[1] = gaussian_tensor({hidden}, 0.5, seed, 0x33);
  teacher[3] = gaussian_tensor({hidden}, 0.5, seed, 0x34);
  const Tensor &W1 = teacher[0], &b1 = teacher[1], &W2 = teacher[2], &b2 = teacher[3], &W3 = teacher[4],
               &b3 = teacher[5];
  std::vector<double> a1(hidden), a2(hidden);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < hidden; ++i) {
      double z = b1[i];
      for (std::size_t j = 0; j < in; ++j) z += W1[i * in + j] * m.X[s * in + j];
      a1[i] = std::tanh(z);
    }
    for (std::size_t i = 0; i < hidden; ++i) {
      double z = b2[i];
      for (std::size_t j = 0; j < hidden; ++j) z += W2[i * hidden + j] * a1[j];
      a2[i] = std::tanh(z);
    }
    for (std::size_t k = 0; k < out; ++k) {
      double z = b3[k];
      for (std::size_t j = 0; j < hidden; ++j) z += W3[k * hidden + j] * a2[j];
      m.Y[s * out + k] = z + noise * keyed_normal(RngKey{seed, 0x35, k, s});
    }
  }
  return m;
}

}  // namespace eco::harness
