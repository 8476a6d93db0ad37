#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace eco {

/// Raised when an argument is outside the mathematical domain of an operation
/// (non-finite input, zero-norm vector, beta outside (0,1), unstable step size).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when tensor shapes or sequence lengths disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>{});
}

/// Dense row-major array of doubles. Carries parameters, gradients, momenta
/// and quantization errors alike.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : values_(shape_numel(shape), fill), shape_(std::move(shape)) {
    check_shape();
  }

  Tensor(std::vector<double> values, Shape shape)
      : values_(std::move(values)), shape_(std::move(shape)) {
    check_shape();
  }

  /// One-dimensional tensor holding `values`.
  static Tensor vector(std::vector<double> values) {
    Shape shape{values.size()};
    return Tensor(std::move(values), std::move(shape));
  }

  static Tensor scalar(double value) { return Tensor({value}, Shape{1}); }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  /// Leading dimension; a 1-D tensor is a single row.
  std::size_t rows() const noexcept {
    if (shape_.size() < 2) return values_.empty() ? 0 : 1;
    return shape_.front();
  }

  std::size_t row_length() const noexcept {
    const std::size_t r = rows();
    return r == 0 ? 0 : values_.size() / r;
  }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * row_length(), row_length());
  }

  bool all_finite() const noexcept {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Tensor&) const = default;

 private:
  void check_shape() const {
    if (shape_.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (std::size_t d : shape_)
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
    if (shape_numel(shape_) != values_.size())
      throw ShapeError("shape " + shape_string(shape_) + " does not match " +
                       std::to_string(values_.size()) + " values");
  }

  std::vector<double> values_;
  Shape shape_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, std::string_view what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
}

inline void require_finite(const Tensor& x, std::string_view what) {
  if (!x.all_finite()) throw DomainError(std::string(what) + ": non-finite value");
}

// Elementwise arithmetic. Shapes must match exactly; no broadcasting.

inline Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "operator+");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "operator-");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline Tensor operator-(const Tensor& a) {
  Tensor out = a;
  for (double& v : out) v = -v;
  return out;
}

inline Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (double& v : out) v *= s;
  return out;
}

inline Tensor operator*(const Tensor& a, double s) { return s * a; }

/// Hadamard product.
inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

inline double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm_sq(const Tensor& a) { return dot(a, a); }
inline double norm(const Tensor& a) { return std::sqrt(norm_sq(a)); }

inline double max_abs(std::span<const double> xs) {
  double m = 0.0;
  for (double v : xs) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs(const Tensor& a) { return max_abs(a.values()); }

/// max_i |a_i - b_i|
inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace eco
