#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "polsar/autodiff/graph.hpp"
#include "polsar/autodiff/kernels.hpp"

namespace polsar::ad {

namespace detail {

template <class T>
void require(bool ok, const Graph<T>& g, Var v, const std::string& what) {
  if (!ok) throw ShapeError(g.describe(v) + ": " + what);
}

template <class T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  auto d = dst.span();
  auto s = src.span();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <class T>
kernels::ConvDims conv_dims(const Shape& x, const Shape& w) {
  return {x[0], x[1], x[2], x[3], w[0], w[2], w[3]};
}

}  // namespace detail

template <class T>
Var add(Graph<T>& g, Var a, Var b) {
  detail::require(g.value(a).shape() == g.value(b).shape(), g, b,
                  "add shape mismatch " + g.value(a).shape().str() + " vs " +
                      g.value(b).shape().str());
  auto out = map_binary(g.value(a), g.value(b), BinaryOp::add);
  return g.record("add", {a, b}, std::move(out), [a, b](Graph<T>& gg, const auto& n) {
    if (gg.requires_grad(a)) detail::add_into(gg.grad(a), n.grad);
    if (gg.requires_grad(b)) detail::add_into(gg.grad(b), n.grad);
  });
}

template <class T>
Var sub(Graph<T>& g, Var a, Var b) {
  detail::require(g.value(a).shape() == g.value(b).shape(), g, b, "sub shape mismatch");
  auto out = map_binary(g.value(a), g.value(b), BinaryOp::sub);
  return g.record("sub", {a, b}, std::move(out), [a, b](Graph<T>& gg, const auto& n) {
    if (gg.requires_grad(a)) detail::add_into(gg.grad(a), n.grad);
    if (gg.requires_grad(b)) {
      auto& gb = gg.grad(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= n.grad[i];
    }
  });
}

template <class T>
Var mul(Graph<T>& g, Var a, Var b) {
  detail::require(g.value(a).shape() == g.value(b).shape(), g, b, "mul shape mismatch");
  auto out = map_binary(g.value(a), g.value(b), BinaryOp::mul);
  return g.record("mul", {a, b}, std::move(out), [a, b](Graph<T>& gg, const auto& n) {
    const auto& va = gg.value(a);
    const auto& vb = gg.value(b);
    if (gg.requires_grad(a)) {
      auto& ga = gg.grad(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * vb[i];
    }
    if (gg.requires_grad(b)) {
      auto& gb = gg.grad(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += n.grad[i] * va[i];
    }
  });
}

template <class T>
Var scale(Graph<T>& g, Var a, T s) {
  auto out = g.value(a);
  for (auto& v : out.span()) v *= s;
  return g.record("scale", {a}, std::move(out), [a, s](Graph<T>& gg, const auto& n) {
    auto& ga = gg.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * n.grad[i];
  });
}

template <class T>
Var sum(Graph<T>& g, Var a) {
  Tensor<T> out(Shape{1}, polsar::sum(g.value(a)));
  return g.record("sum", {a}, std::move(out), [a](Graph<T>& gg, const auto& n) {
    auto& ga = gg.grad(a);
    for (auto& v : ga.span()) v += n.grad[0];
  });
}

template <class T>
Var mean(Graph<T>& g, Var a) {
  const T inv = T{1} / static_cast<T>(g.value(a).size());
  return scale(g, sum(g, a), inv);
}

template <class T>
Var relu(Graph<T>& g, Var x) {
  auto out = g.value(x);
  for (auto& v : out.span()) v = v > T{0} ? v : T{0};
  return g.record("relu", {x}, std::move(out), [x](Graph<T>& gg, const auto& n) {
    auto& gx = gg.grad(x);
    const auto& y = n.value;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (y[i] > T{0}) gx[i] += n.grad[i];
  });
}

template <class T>
Var reshape(Graph<T>& g, Var x, Shape shape) {
  auto out = g.value(x).reshaped(std::move(shape));
  return g.record("reshape", {x}, std::move(out), [x](Graph<T>& gg, const auto& n) {
    detail::add_into(gg.grad(x), n.grad.reshaped(gg.value(x).shape()));
  });
}

/// [N, ...] -> [N, prod(...)]
template <class T>
Var flatten(Graph<T>& g, Var x) {
  const auto& s = g.value(x).shape();
  return reshape(g, x, Shape{s[0], s.elements() / s[0]});
}

/// Concatenate 4-D tensors along the channel axis.
template <class T>
Var concat_channels(Graph<T>& g, const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const auto& s0 = g.value(parts[0]).shape();
  std::size_t channels = 0;
  for (auto p : parts) {
    const auto& s = g.value(p).shape();
    detail::require(s.rank() == 4 && s[0] == s0[0] && s[2] == s0[2] && s[3] == s0[3], g, p,
                    "concat_channels spatial/batch mismatch " + s.str() + " vs " + s0.str());
    channels += s[1];
  }
  const std::size_t n = s0[0], hw = s0[2] * s0[3];
  Tensor<T> out(Shape{n, channels, s0[2], s0[3]});
  std::size_t offset = 0;
  for (auto p : parts) {
    const auto& v = g.value(p);
    const std::size_t c = v.shape()[1];
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(v.data() + i * c * hw, c * hw, out.data() + (i * channels + offset) * hw);
    offset += c;
  }
  return g.record("concat", parts, std::move(out), [parts, n, hw, channels](Graph<T>& gg,
                                                                            const auto& node) {
    std::size_t off = 0;
    for (auto p : parts) {
      const std::size_t c = gg.value(p).shape()[1];
      if (gg.requires_grad(p)) {
        auto& gp = gg.grad(p);
        for (std::size_t i = 0; i < n; ++i) {
          const T* src = node.grad.data() + (i * channels + off) * hw;
          T* dst = gp.data() + i * c * hw;
          for (std::size_t j = 0; j < c * hw; ++j) dst[j] += src[j];
        }
      }
      off += c;
    }
  });
}

/// Channels [begin, begin+count) of a 4-D tensor.
template <class T>
Var slice_channels(Graph<T>& g, Var x, std::size_t begin, std::size_t count) {
  const auto& s = g.value(x).shape();
  detail::require(s.rank() == 4 && begin + count <= s[1] && count > 0, g, x,
                  "slice_channels out of range");
  const std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
  Tensor<T> out(Shape{n, count, s[2], s[3]});
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(g.value(x).data() + (i * c + begin) * hw, count * hw,
                out.data() + i * count * hw);
  return g.record("slice", {x}, std::move(out),
                  [x, n, c, hw, begin, count](Graph<T>& gg, const auto& node) {
                    auto& gx = gg.grad(x);
                    for (std::size_t i = 0; i < n; ++i) {
                      const T* src = node.grad.data() + i * count * hw;
                      T* dst = gx.data() + (i * c + begin) * hw;
                      for (std::size_t j = 0; j < count * hw; ++j) dst[j] += src[j];
                    }
                  });
}

/// SAME-padded stride-1 cross-correlation. weight [K, C, kh, kw], bias [K] or
/// invalid.
template <class T>
Var conv2d(Graph<T>& g, Var x, Var weight, Var bias = {}) {
  const auto& xs = g.value(x).shape();
  const auto& ws = g.value(weight).shape();
  detail::require(xs.rank() == 4 && ws.rank() == 4, g, x, "conv2d expects 4-D input and kernel");
  detail::require(xs[1] == ws[1], g, x,
                  "conv2d channel mismatch: input " + xs.str() + ", kernel " + ws.str());
  detail::require(ws[2] % 2 == 1 && ws[3] % 2 == 1, g, weight, "conv2d kernel must be odd-sized");
  if (bias.valid())
    detail::require(g.value(bias).size() == ws[0], g, bias, "conv2d bias length mismatch");
  const auto d = detail::conv_dims<T>(xs, ws);
  Tensor<T> out(Shape{d.n, d.k, d.h, d.w});
  kernels::conv2d_forward(d, g.value(x).data(), g.value(weight).data(),
                          bias.valid() ? g.value(bias).data() : nullptr, out.data());
  std::vector<Var> inputs{x, weight};
  if (bias.valid()) inputs.push_back(bias);
  return g.record("conv2d", inputs, std::move(out), [x, weight, bias, d](Graph<T>& gg,
                                                                          const auto& n) {
    T* dx = gg.requires_grad(x) ? gg.grad(x).data() : nullptr;
    T* dw = gg.requires_grad(weight) ? gg.grad(weight).data() : nullptr;
    T* db = bias.valid() && gg.requires_grad(bias) ? gg.grad(bias).data() : nullptr;
    kernels::conv2d_backward(d, gg.value(x).data(), gg.value(weight).data(), n.grad.data(), dx,
                             dw, db);
  });
}

/// Depthwise spatial filtering with multiplier 1. weight [C, kh, kw].
template <class T>
Var depthwise_conv2d(Graph<T>& g, Var x, Var weight) {
  const auto& xs = g.value(x).shape();
  const auto& ws = g.value(weight).shape();
  detail::require(xs.rank() == 4 && ws.rank() == 3, g, x,
                  "depthwise_conv2d expects 4-D input and [C,kh,kw] kernel");
  detail::require(xs[1] == ws[0], g, x,
                  "depthwise_conv2d channel mismatch: input " + xs.str() + ", kernel " +
                      ws.str());
  const kernels::ConvDims d{xs[0], xs[1], xs[2], xs[3], xs[1], ws[1], ws[2]};
  Tensor<T> out(xs);
  kernels::depthwise_forward(d, g.value(x).data(), g.value(weight).data(), out.data());
  return g.record("depthwise_conv2d", {x, weight}, std::move(out),
                  [x, weight, d](Graph<T>& gg, const auto& n) {
                    T* dx = gg.requires_grad(x) ? gg.grad(x).data() : nullptr;
                    T* dw = gg.requires_grad(weight) ? gg.grad(weight).data() : nullptr;
                    kernels::depthwise_backward(d, gg.value(x).data(), gg.value(weight).data(),
                                                n.grad.data(), dx, dw);
                  });
}

template <class T>
Var max_pool(Graph<T>& g, Var x, std::size_t window = 2, std::size_t stride = 2) {
  const auto& s = g.value(x).shape();
  detail::require(s.rank() == 4 && s[2] >= window && s[3] >= window, g, x,
                  "max_pool input too small: " + s.str());
  const std::size_t oh = (s[2] - window) / stride + 1, ow = (s[3] - window) / stride + 1;
  Tensor<T> out(Shape{s[0], s[1], oh, ow});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  kernels::max_pool_forward(s[0], s[1], s[2], s[3], window, stride, g.value(x).data(),
                            out.data(), argmax->data());
  return g.record("max_pool", {x}, std::move(out), [x, argmax](Graph<T>& gg, const auto& n) {
    auto& gx = gg.grad(x);
    for (std::size_t i = 0; i < argmax->size(); ++i) gx[(*argmax)[i]] += n.grad[i];
  });
}

/// Batch normalization over (N,H,W) per channel for [N,C,H,W], or over N for
/// [N,C]. Training mode normalizes with batch statistics and updates the
/// running estimates in place; inference mode uses the running estimates.
template <class T>
Var batch_norm(Graph<T>& g, Var x, Var gamma, Var beta, Parameter<T>& running_mean,
               Parameter<T>& running_var, T momentum = T(0.1), T eps = T(1e-5)) {
  const auto& s = g.value(x).shape();
  detail::require(s.rank() == 4 || s.rank() == 2, g, x, "batch_norm expects 2-D or 4-D input");
  const std::size_t n = s[0], c = s[1];
  const std::size_t hw = s.rank() == 4 ? s[2] * s[3] : 1;
  detail::require(g.value(gamma).size() == c && g.value(beta).size() == c &&
                      running_mean.value.size() == c && running_var.value.size() == c,
                  g, x, "batch_norm channel mismatch");
  const bool train = g.training();
  if (train && n < 2) throw ShapeError(g.describe(x) + ": batch_norm needs batch >= 2 in training mode");

  const auto& xv = g.value(x);
  const auto& gv = g.value(gamma);
  const auto& bv = g.value(beta);
  const std::size_t m = n * hw;
  auto xhat = std::make_shared<Tensor<T>>(s);
  auto inv_std = std::make_shared<std::vector<T>>(c);
  Tensor<T> out(s);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (train) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < hw; ++p) acc += xv[(i * c + ch) * hw + p];
      mu = acc / static_cast<double>(m);
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < hw; ++p) {
          const double dlt = xv[(i * c + ch) * hw + p] - mu;
          sq += dlt * dlt;
        }
      var = sq / static_cast<double>(m);
      const double unbiased = m > 1 ? sq / static_cast<double>(m - 1) : var;
      auto& rm = running_mean.value[ch];
      auto& rv = running_var.value[ch];
      rm = static_cast<T>((1.0 - momentum) * rm + momentum * mu);
      rv = static_cast<T>((1.0 - momentum) * rv + momentum * unbiased);
    } else {
      mu = running_mean.value[ch];
      var = running_var.value[ch];
    }
    const T is = static_cast<T>(1.0 / std::sqrt(var + eps));
    (*inv_std)[ch] = is;
    const T mu_t = static_cast<T>(mu);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t idx = (i * c + ch) * hw + p;
        const T xh = (xv[idx] - mu_t) * is;
        (*xhat)[idx] = xh;
        out[idx] = xh * gv[ch] + bv[ch];
      }
  }
  return g.record(
      "batch_norm", {x, gamma, beta}, std::move(out),
      [x, gamma, beta, xhat, inv_std, n, c, hw, m, train](Graph<T>& gg, const auto& node) {
        const auto& dy = node.grad;
        const auto& gv2 = gg.value(gamma);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < hw; ++p) {
              const std::size_t idx = (i * c + ch) * hw + p;
              sum_dy += dy[idx];
              sum_dy_xhat += static_cast<double>(dy[idx]) * (*xhat)[idx];
            }
          if (gg.requires_grad(gamma)) gg.grad(gamma)[ch] += static_cast<T>(sum_dy_xhat);
          if (gg.requires_grad(beta)) gg.grad(beta)[ch] += static_cast<T>(sum_dy);
          if (!gg.requires_grad(x)) continue;
          auto& gx = gg.grad(x);
          const T k = gv2[ch] * (*inv_std)[ch];
          if (train) {
            const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(m));
            const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / static_cast<double>(m));
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t p = 0; p < hw; ++p) {
                const std::size_t idx = (i * c + ch) * hw + p;
                gx[idx] += k * (dy[idx] - mean_dy - (*xhat)[idx] * mean_dy_xhat);
              }
          } else {
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t p = 0; p < hw; ++p) {
                const std::size_t idx = (i * c + ch) * hw + p;
                gx[idx] += k * dy[idx];
              }
          }
        }
      });
}

/// Inverted dropout with drop probability `p`; identity outside training.
template <class T>
Var dropout(Graph<T>& g, Var x, double p) {
  if (p < 0.0 || p >= 1.0) throw ShapeError("dropout probability must be in [0,1)");
  if (!g.training() || p == 0.0) {
    return g.record("dropout(identity)", {x}, g.value(x), [x](Graph<T>& gg, const auto& n) {
      detail::add_into(gg.grad(x), n.grad);
    });
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<T>>(g.value(x).size());
  auto out = g.value(x);
  auto& rng = g.rng();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.uniform() < p ? T{0} : keep_scale;
    out[i] *= (*mask)[i];
  }
  return g.record("dropout", {x}, std::move(out), [x, mask](Graph<T>& gg, const auto& n) {
    auto& gx = gg.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i] * (*mask)[i];
  });
}

/// y[N, Dout] = x[N, Din] * weight[Din, Dout] + bias[Dout]
template <class T>
Var linear(Graph<T>& g, Var x, Var weight, Var bias = {}) {
  const auto& xs = g.value(x).shape();
  const auto& ws = g.value(weight).shape();
  detail::require(xs.rank() == 2 && ws.rank() == 2 && xs[1] == ws[0], g, x,
                  "linear shape mismatch: input " + xs.str() + ", weight " + ws.str());
  const std::size_t n = xs[0], din = ws[0], dout = ws[1];
  Tensor<T> out(Shape{n, dout});
  if (bias.valid()) {
    detail::require(g.value(bias).size() == dout, g, bias, "linear bias length mismatch");
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(g.value(bias).data(), dout, out.data() + i * dout);
  }
  kernels::gemm_accumulate(false, n, dout, din, g.value(x).data(), din, g.value(weight).data(),
                           dout, out.data(), dout);
  std::vector<Var> inputs{x, weight};
  if (bias.valid()) inputs.push_back(bias);
  return g.record("linear", inputs, std::move(out), [x, weight, bias, n, din, dout](
                                                        Graph<T>& gg, const auto& node) {
    const T* dy = node.grad.data();
    if (gg.requires_grad(weight))
      kernels::gemm_accumulate(true, din, dout, n, gg.value(x).data(), din, dy, dout,
                               gg.grad(weight).data(), dout);
    if (bias.valid() && gg.requires_grad(bias)) {
      auto& gb = gg.grad(bias);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dout; ++j) gb[j] += dy[i * dout + j];
    }
    if (gg.requires_grad(x))
      kernels::gemm_accumulate_bt(n, din, dout, dy, gg.value(weight).data(), gg.grad(x).data());
  });
}

namespace detail {
template <class T>
void softmax_rows(const T* x, std::size_t rows, std::size_t cols, T* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * cols;
    T* yr = y + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    T s{0};
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      s += yr[j];
    }
    for (std::size_t j = 0; j < cols; ++j) yr[j] /= s;
  }
}
}  // namespace detail

/// Row-wise softmax of [N, c] logits.
template <class T>
Var softmax(Graph<T>& g, Var x) {
  const auto& s = g.value(x).shape();
  detail::require(s.rank() == 2, g, x, "softmax expects [N, c]");
  Tensor<T> out(s);
  detail::softmax_rows(g.value(x).data(), s[0], s[1], out.data());
  return g.record("softmax", {x}, std::move(out), [x](Graph<T>& gg, const auto& n) {
    const std::size_t rows = n.value.shape()[0], cols = n.value.shape()[1];
    auto& gx = gg.grad(x);
    for (std::size_t r = 0; r < rows; ++r) {
      T dot{0};
      for (std::size_t j = 0; j < cols; ++j) dot += n.grad[r * cols + j] * n.value[r * cols + j];
      for (std::size_t j = 0; j < cols; ++j)
        gx[r * cols + j] += n.value[r * cols + j] * (n.grad[r * cols + j] - dot);
    }
  });
}

/// Mean over the batch of -log softmax(logits)[label]. Labels are 0-based.
template <class T>
Var softmax_cross_entropy(Graph<T>& g, Var logits, std::span<const std::size_t> labels) {
  const auto& s = g.value(logits).shape();
  detail::require(s.rank() == 2 && s[0] == labels.size(), g, logits,
                  "softmax_cross_entropy expects [N, c] logits and N labels");
  const std::size_t rows = s[0], cols = s[1];
  auto probs = std::make_shared<Tensor<T>>(s);
  detail::softmax_rows(g.value(logits).data(), rows, cols, probs->data());
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  double loss = 0.0;
  const auto& lv = g.value(logits);
  for (std::size_t r = 0; r < rows; ++r) {
    if (lab[r] >= cols) throw ShapeError(g.describe(logits) + ": label out of range");
    // log-sum-exp form keeps saturated logits finite
    const T* xr = lv.data() + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    double se = 0.0;
    for (std::size_t j = 0; j < cols; ++j) se += std::exp(static_cast<double>(xr[j] - mx));
    loss += std::log(se) - static_cast<double>(xr[lab[r]] - mx);
  }
  Tensor<T> out(Shape{1}, static_cast<T>(loss / static_cast<double>(rows)));
  return g.record("softmax_cross_entropy", {logits}, std::move(out),
                  [logits, probs, lab, rows, cols](Graph<T>& gg, const auto& n) {
                    auto& gx = gg.grad(logits);
                    const T sc = n.grad[0] / static_cast<T>(rows);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < cols; ++j) {
                        const T target = j == lab[r] ? T{1} : T{0};
                        gx[r * cols + j] += sc * ((*probs)[r * cols + j] - target);
                      }
                  });
}

/// sum_i w[i] * v_i over equally shaped inputs.
template <class T>
Var weighted_sum(Graph<T>& g, const std::vector<Var>& vs, Var w) {
  detail::require(!vs.empty() && g.value(w).size() == vs.size(), g, w,
                  "weighted_sum expects one weight per input");
  const auto& s0 = g.value(vs[0]).shape();
  for (auto v : vs)
    detail::require(g.value(v).shape() == s0, g, v,
                    "weighted_sum shape mismatch " + g.value(v).shape().str() + " vs " +
                        s0.str());
  Tensor<T> out(s0);
  const auto& wv = g.value(w);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const auto& v = g.value(vs[i]);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += wv[i] * v[j];
  }
  std::vector<Var> inputs = vs;
  inputs.push_back(w);
  return g.record("weighted_sum", inputs, std::move(out), [vs, w](Graph<T>& gg, const auto& n) {
    const auto& wv2 = gg.value(w);
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const auto& v = gg.value(vs[i]);
      if (gg.requires_grad(w)) {
        T acc{0};
        for (std::size_t j = 0; j < v.size(); ++j) acc += n.grad[j] * v[j];
        gg.grad(w)[i] += acc;
      }
      if (gg.requires_grad(vs[i])) {
        auto& gv = gg.grad(vs[i]);
        for (std::size_t j = 0; j < gv.size(); ++j) gv[j] += wv2[i] * n.grad[j];
      }
    }
  });
}

}  // namespace polsar::ad
