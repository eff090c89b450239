#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "polsar/core/error.hpp"
#include "polsar/core/gemm.hpp"
#include "polsar/core/rng.hpp"

namespace polsar {

/// Ordered list of positive extents. Activations use N,C,H,W; kernels use
/// Kout,Kin,Kh,Kw.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(); }

  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  const std::vector<std::size_t>& dims() const { return dims_; }

  std::size_t elements() const {
    return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>{});
  }

  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
    os << ']';
    return os.str();
  }

 private:
  void validate() const {
    if (dims_.empty()) throw ShapeError("invalid shape: rank 0");
    for (auto d : dims_)
      if (d == 0) throw ShapeError("invalid shape: zero extent in " + str());
  }

  std::vector<std::size_t> dims_;
};

namespace fill {
struct Zeros {};
struct Constant {
  double value;
};
struct Uniform {
  double lo, hi;
  std::uint64_t seed;
};
struct Gaussian {
  double mean, stddev;
  std::uint64_t seed;
};
}  // namespace fill

using FillSpec = std::variant<fill::Zeros, fill::Constant, fill::Uniform, fill::Gaussian>;

enum class Precision : std::uint8_t { single = 1, double_ = 2 };

template <class T>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? Precision::single : Precision::double_;
}

/// Dense row-major real array.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T value = T{0})
      : shape_(std::move(shape)), data_(shape_.elements(), value) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.elements())
      throw ShapeError("buffer length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
  }

  static Tensor create(const Shape& shape, const FillSpec& spec) {
    Tensor t(shape);
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, fill::Constant>) {
            std::fill(t.data_.begin(), t.data_.end(), static_cast<T>(s.value));
          } else if constexpr (std::is_same_v<S, fill::Uniform>) {
            Rng rng(s.seed);
            for (auto& v : t.data_) v = static_cast<T>(rng.uniform(s.lo, s.hi));
          } else if constexpr (std::is_same_v<S, fill::Gaussian>) {
            Rng rng(s.seed);
            for (auto& v : t.data_) v = static_cast<T>(rng.gaussian(s.mean, s.stddev));
          }
        },
        spec);
    return t;
  }

  static Tensor from(std::initializer_list<T> values) {
    return Tensor(Shape{values.size()}, std::vector<T>(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// 4-D accessor in N,C,H,W order.
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  Tensor reshaped(Shape shape) const& {
    if (shape.elements() != size())
      throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
    return Tensor(std::move(shape), data_);
  }

  void fill_value(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

enum class BinaryOp { add, sub, mul, div, max };

/// Elementwise a (op) b. `b` must match `a`, be a single element, or match the
/// trailing dimensions of `a`.
template <class T>
Tensor<T> map_binary(const Tensor<T>& a, const Tensor<T>& b, BinaryOp op) {
  const auto& ad = a.shape().dims();
  const auto& bd = b.shape().dims();
  bool ok = b.size() == 1;
  if (!ok && bd.size() <= ad.size())
    ok = std::equal(bd.rbegin(), bd.rend(), ad.rbegin());
  if (!ok)
    throw ShapeError("shape mismatch: " + a.shape().str() + " vs " + b.shape().str());

  Tensor<T> out(a.shape());
  const std::size_t period = b.size();
  auto apply = [op](T x, T y) -> T {
    switch (op) {
      case BinaryOp::add: return x + y;
      case BinaryOp::sub: return x - y;
      case BinaryOp::mul: return x * y;
      case BinaryOp::div: return x / y;
      case BinaryOp::max: return std::max(x, y);
    }
    return x;
  };
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(a[i], b[i % period]);
#ifndef NDEBUG
  if (op == BinaryOp::div)
    for (auto v : b.span())
      if (v == T{0}) {
        std::fputs("polsar: map_binary division by exact zero\n", stderr);
        break;
      }
#endif
  return out;
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape().rank() != 2 || b.shape().rank() != 2 || a.shape()[1] != b.shape()[0])
    throw ShapeError("matmul shape mismatch: " + a.shape().str() + " x " + b.shape().str());
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor<T> out(Shape{m, n});
  kernels::gemm_accumulate(false, m, n, k, a.data(), k, b.data(), n, out.data(), n);
  return out;
}

enum class ReduceOp { sum, mean, max, argmax };

/// Reduce over `axes` (removed from the result). A full reduction yields
/// shape [1]. argmax accepts exactly one axis; ties go to the lowest index.
template <class T>
Tensor<T> reduce(const Tensor<T>& a, std::vector<std::size_t> axes, ReduceOp op) {
  const auto& dims = a.shape().dims();
  const std::size_t rank = dims.size();
  std::sort(axes.begin(), axes.end());
  axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
  for (auto ax : axes)
    if (ax >= rank) throw ShapeError("invalid reduction axis " + std::to_string(ax));
  if (op == ReduceOp::argmax && axes.size() != 1)
    throw ShapeError("argmax requires exactly one axis");

  std::vector<bool> reduced(rank, false);
  for (auto ax : axes) reduced[ax] = true;
  std::vector<std::size_t> out_dims;
  for (std::size_t i = 0; i < rank; ++i)
    if (!reduced[i]) out_dims.push_back(dims[i]);
  if (out_dims.empty()) out_dims.push_back(1);
  Tensor<T> out{Shape(out_dims)};

  std::size_t group = 1;
  for (auto ax : axes) group *= dims[ax];

  // Walk the input in row-major order and map each element to its output slot.
  std::vector<double> acc(out.size(), 0.0);
  std::vector<T> best(out.size(), -std::numeric_limits<T>::infinity());
  std::vector<std::size_t> best_idx(out.size(), 0);
  std::vector<bool> seen(out.size(), false);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < a.size(); ++flat) {
    std::size_t o = 0, along = 0;
    for (std::size_t d = 0; d < rank; ++d) {
      if (reduced[d])
        along = along * dims[d] + idx[d];
      else
        o = o * dims[d] + idx[d];
    }
    const T v = a[flat];
    switch (op) {
      case ReduceOp::sum:
      case ReduceOp::mean: acc[o] += v; break;
      case ReduceOp::max:
      case ReduceOp::argmax:
        if (!seen[o] || v > best[o]) {
          best[o] = v;
          best_idx[o] = along;
          seen[o] = true;
        }
        break;
    }
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < dims[d]) break;
      idx[d] = 0;
    }
  }
  for (std::size_t o = 0; o < out.size(); ++o) {
    switch (op) {
      case ReduceOp::sum: out[o] = static_cast<T>(acc[o]); break;
      case ReduceOp::mean: out[o] = static_cast<T>(acc[o] / static_cast<double>(group)); break;
      case ReduceOp::max: out[o] = best[o]; break;
      case ReduceOp::argmax: out[o] = static_cast<T>(best_idx[o]); break;
    }
  }
  return out;
}

/// Full reduction helper returning a scalar.
template <class T>
T sum(const Tensor<T>& a) {
  double s = 0.0;
  for (auto v : a.span()) s += v;
  return static_cast<T>(s);
}

}  // namespace polsar
