#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polsar/autodiff/graph.hpp"
#include "polsar/autodiff/ops.hpp"

namespace polsar::nn {

using ad::Graph;
using ad::Parameter;
using ad::ParameterStore;
using ad::Var;

/// Parameter creation with per-name seeding: a parameter's initial value
/// depends only on the base seed and its full name, never on build order.
template <class T>
class Builder {
 public:
  Builder(ParameterStore<T>& store, std::uint64_t seed) : store_(store), seed_(seed) {}

  ParameterStore<T>& store() { return store_; }

  /// He-style N(0, 2 / fan_in).
  Parameter<T>& he_normal(const std::string& name, Shape shape, std::size_t fan_in) {
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    return store_.add(name,
                      Tensor<T>::create(shape, fill::Gaussian{0.0, sd, name_seed(name)}));
  }

  Parameter<T>& constant(const std::string& name, Shape shape, double v, bool trainable = true) {
    return store_.add(name, Tensor<T>(std::move(shape), static_cast<T>(v)), trainable);
  }

 private:
  std::uint64_t name_seed(std::string_view name) const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char ch : name) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    return Rng::derive(seed_, h);
  }

  ParameterStore<T>& store_;
  std::uint64_t seed_;
};

enum class ConvKind { vanilla, depthwise_separable };

inline const char* to_string(ConvKind k) {
  return k == ConvKind::vanilla ? "vanilla" : "depthwise_separable";
}

/// 3x3 (or 1x1) SAME convolution, stride 1. Kernel [Kout, Kin, k, k].
template <class T>
class Conv2DLayer {
 public:
  Conv2DLayer(Builder<T>& b, const std::string& name, std::size_t in, std::size_t out,
              std::size_t kernel = 3)
      : kernel_(&b.he_normal(name + "/kernel", Shape{out, in, kernel, kernel},
                             in * kernel * kernel)),
        bias_(&b.constant(name + "/bias", Shape{out}, 0.0)) {}

  Var forward(Graph<T>& g, Var x) const {
    return ad::conv2d(g, x, g.param(*kernel_), g.param(*bias_));
  }

  std::size_t in_channels() const { return kernel_->value.shape()[1]; }
  std::size_t out_channels() const { return kernel_->value.shape()[0]; }
  std::size_t parameter_count() const { return kernel_->value.size() + bias_->value.size(); }

 private:
  Parameter<T>* kernel_;
  Parameter<T>* bias_;
};

/// Per-channel 3x3 depthwise filter (multiplier 1) followed by a 1x1
/// pointwise convolution to `out` channels; bias after the pointwise stage.
template <class T>
class DepthwiseSeparableConvLayer {
 public:
  DepthwiseSeparableConvLayer(Builder<T>& b, const std::string& name, std::size_t in,
                              std::size_t out, std::size_t kernel = 3)
      : depthwise_(&b.he_normal(name + "/depthwise", Shape{in, kernel, kernel}, kernel * kernel)),
        pointwise_(&b.he_normal(name + "/pointwise", Shape{out, in, 1, 1}, in)),
        bias_(&b.constant(name + "/bias", Shape{out}, 0.0)) {}

  Var forward(Graph<T>& g, Var x) const {
    Var spatial = ad::depthwise_conv2d(g, x, g.param(*depthwise_));
    return ad::conv2d(g, spatial, g.param(*pointwise_), g.param(*bias_));
  }

  std::size_t in_channels() const { return depthwise_->value.shape()[0]; }
  std::size_t out_channels() const { return pointwise_->value.shape()[0]; }
  /// 3*3*c + 1*1*c*K, bias excluded.
  std::size_t weight_count() const { return depthwise_->value.size() + pointwise_->value.size(); }
  std::size_t parameter_count() const { return weight_count() + bias_->value.size(); }

  Parameter<T>& depthwise() { return *depthwise_; }
  Parameter<T>& pointwise() { return *pointwise_; }
  Parameter<T>& bias() { return *bias_; }

 private:
  Parameter<T>* depthwise_;
  Parameter<T>* pointwise_;
  Parameter<T>* bias_;
};

template <class T>
class BatchNormLayer {
 public:
  BatchNormLayer(Builder<T>& b, const std::string& name, std::size_t channels,
                 double momentum = 0.1, double eps = 1e-5)
      : scale_(&b.constant(name + "/scale", Shape{channels}, 1.0)),
        shift_(&b.constant(name + "/shift", Shape{channels}, 0.0)),
        running_mean_(&b.constant(name + "/running_mean", Shape{channels}, 0.0, false)),
        running_var_(&b.constant(name + "/running_var", Shape{channels}, 1.0, false)),
        momentum_(momentum),
        eps_(eps) {}

  Var forward(Graph<T>& g, Var x) const {
    return ad::batch_norm(g, x, g.param(*scale_), g.param(*shift_), *running_mean_,
                          *running_var_, static_cast<T>(momentum_), static_cast<T>(eps_));
  }

  Parameter<T>& scale() { return *scale_; }
  Parameter<T>& shift() { return *shift_; }
  Parameter<T>& running_mean() { return *running_mean_; }
  Parameter<T>& running_var() { return *running_var_; }

 private:
  Parameter<T>* scale_;
  Parameter<T>* shift_;
  Parameter<T>* running_mean_;
  Parameter<T>* running_var_;
  double momentum_, eps_;
};

/// Inverted dropout; `drop` is the probability of zeroing an activation.
struct DropoutLayer {
  double drop = 0.0;

  template <class T>
  Var forward(Graph<T>& g, Var x) const {
    return ad::dropout(g, x, drop);
  }
};

/// y = x W + b with W [in, out].
template <class T>
class FullyConnectedLayer {
 public:
  FullyConnectedLayer(Builder<T>& b, const std::string& name, std::size_t in, std::size_t out)
      : weight_(&b.he_normal(name + "/weight", Shape{in, out}, in)),
        bias_(&b.constant(name + "/bias", Shape{out}, 0.0)) {}

  Var forward(Graph<T>& g, Var x) const {
    return ad::linear(g, ad::flatten(g, x), g.param(*weight_), g.param(*bias_));
  }

  Parameter<T>& weight() { return *weight_; }
  Parameter<T>& bias() { return *bias_; }

 private:
  Parameter<T>* weight_;
  Parameter<T>* bias_;
};

/// Trainable, unconstrained mixing weights: out = sum_i w_i v_i.
template <class T>
class WeightedSumLayer {
 public:
  WeightedSumLayer(Builder<T>& b, const std::string& name, std::size_t inputs = 3)
      : weights_(&b.constant(name + "/w", Shape{inputs}, 1.0 / static_cast<double>(inputs))) {}

  Var forward(Graph<T>& g, const std::vector<Var>& vs) const {
    return ad::weighted_sum(g, vs, g.param(*weights_));
  }

  Parameter<T>& weights() { return *weights_; }

 private:
  Parameter<T>* weights_;
};

/// Conv -> Dropout -> BN -> ReLU. Dropout is skipped when `drop` is 0.
template <class T>
class CompositeConv {
 public:
  CompositeConv(Builder<T>& b, const std::string& name, ConvKind kind, std::size_t in,
                std::size_t out, double drop)
      : kind_(kind), dropout_{drop}, bn_(b, name + "/bn", out) {
    if (kind == ConvKind::vanilla)
      vanilla_.emplace(b, name + "/conv", in, out);
    else
      separable_.emplace(b, name + "/conv", in, out);
  }

  Var forward(Graph<T>& g, Var x) const {
    Var y = kind_ == ConvKind::vanilla ? vanilla_->forward(g, x)
                                       : separable_->forward(g, x);
    if (dropout_.drop > 0.0) y = dropout_.forward(g, y);
    return ad::relu(g, bn_.forward(g, y));
  }

  std::size_t out_channels() const {
    return kind_ == ConvKind::vanilla ? vanilla_->out_channels()
                                      : separable_->out_channels();
  }

 private:
  ConvKind kind_;
  std::optional<Conv2DLayer<T>> vanilla_;
  std::optional<DepthwiseSeparableConvLayer<T>> separable_;
  DropoutLayer dropout_;
  BatchNormLayer<T> bn_;
};

struct DenseBlockConfig {
  std::size_t layers = 5;
  std::size_t growth = 16;
  std::size_t first_multiplier = 4;  // first layer emits multiplier * growth maps

  std::size_t output_channels(std::size_t in) const {
    return in + first_multiplier * growth + (layers - 1) * growth;
  }
};

/// Densely connected block: layer l consumes the channel concatenation of the
/// block input and every earlier layer output; the block returns the
/// concatenation of all of them, input first.
template <class T>
class DenseBlock {
 public:
  DenseBlock(Builder<T>& b, const std::string& name, std::size_t in, DenseBlockConfig cfg,
             double drop)
      : cfg_(cfg), in_(in) {
    if (cfg.layers == 0) throw DataError("dense block needs at least one layer");
    std::size_t width = in;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::size_t out = l == 0 ? cfg.first_multiplier * cfg.growth : cfg.growth;
      const bool last = l + 1 == cfg.layers;
      layers_.emplace_back(b, name + "/layer" + std::to_string(l + 1), ConvKind::vanilla, width,
                           out, last ? 0.0 : drop);
      width += out;
    }
  }

  Var forward(Graph<T>& g, Var x) const {
    std::vector<Var> features{x};
    for (const auto& layer : layers_) {
      Var input = features.size() == 1 ? features[0] : ad::concat_channels(g, features);
      features.push_back(layer.forward(g, input));
    }
    return ad::concat_channels(g, features);
  }

  std::size_t out_channels() const { return cfg_.output_channels(in_); }

 private:
  DenseBlockConfig cfg_;
  std::size_t in_;
  std::vector<CompositeConv<T>> layers_;
};

}  // namespace polsar::nn
