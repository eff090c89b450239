#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polsar/autodiff/graph.hpp"
#include "polsar/autodiff/ops.hpp"
#include "polsar/data/polsar_image.hpp"
#include "polsar/models/config.hpp"
#include "polsar/nn/layers.hpp"

namespace polsar::models {

using ad::Graph;
using ad::ParameterStore;
using ad::Var;

/// Two composite conv layers; dropout only on the first.
template <class T>
class ConvBlock {
 public:
  ConvBlock(nn::Builder<T>& b, const std::string& name, nn::ConvKind kind, std::size_t in,
            std::size_t out, double drop)
      : first_(b, name + "/conv1", kind, in, out, drop),
        second_(b, name + "/conv2", kind, out, out, 0.0) {}

  Var forward(Graph<T>& g, Var x) const { return second_.forward(g, first_.forward(g, x)); }

 private:
  nn::CompositeConv<T> first_, second_;
};

struct BranchConfig {
  std::size_t in_channels = 3;
  std::array<std::size_t, 3> widths{32, 64, 64};
  nn::ConvKind kind = nn::ConvKind::vanilla;
  double conv_drop = 0.2;
};

/// block1 -> pool -> block2 -> pool -> block3. Keeps the block-2 (pre-pool)
/// and block-3 maps so either can feed early fusion.
template <class T>
class Branch {
 public:
  struct Features {
    Var block2, block3;
  };

  Branch(nn::Builder<T>& b, const std::string& name, const BranchConfig& cfg)
      : cfg_(cfg),
        block1_(b, name + "/block1", cfg.kind, cfg.in_channels, cfg.widths[0], cfg.conv_drop),
        block2_(b, name + "/block2", cfg.kind, cfg.widths[0], cfg.widths[1], cfg.conv_drop),
        block3_(b, name + "/block3", cfg.kind, cfg.widths[1], cfg.widths[2], cfg.conv_drop) {}

  Features forward(Graph<T>& g, Var x) const {
    Var h = ad::max_pool(g, block1_.forward(g, x));
    Var b2 = block2_.forward(g, h);
    Var b3 = block3_.forward(g, ad::max_pool(g, b2));
    return {b2, b3};
  }

  const BranchConfig& config() const { return cfg_; }

  /// Side of the block-3 map for a square input of side `patch`.
  static std::size_t output_side(std::size_t patch) { return patch / 2 / 2; }

 private:
  BranchConfig cfg_;
  ConvBlock<T> block1_, block2_, block3_;
};

/// flatten -> FC(hidden) -> dropout -> ReLU -> FC(classes): the pre-softmax
/// vector v_i of one classifier.
template <class T>
class Head {
 public:
  Head(nn::Builder<T>& b, const std::string& name, std::size_t in, std::size_t hidden,
       std::size_t classes, double drop)
      : fc1_(b, name + "/fc1", in, hidden), fc2_(b, name + "/fc2", hidden, classes), drop_{drop} {}

  Var forward(Graph<T>& g, Var x) const {
    Var h = fc1_.forward(g, x);
    if (drop_.drop > 0.0) h = drop_.forward(g, h);
    return fc2_.forward(g, ad::relu(g, h));
  }

 private:
  nn::FullyConnectedLayer<T> fc1_, fc2_;
  nn::DropoutLayer drop_;
};

struct HeadInfo {
  std::string name;
  double loss_weight = 1.0;
};

/// A built network. Owns its parameters; the input is a raw [N, 9, s, s]
/// batch which is z-scored with the stored input statistics first.
template <class T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    nn::Builder<T> b(store_, cfg_.seed);
    input_mean_ = &b.constant("input/mean", Shape{cfg_.input_channels}, 0.0, false);
    input_std_ = &b.constant("input/std", Shape{cfg_.input_channels}, 1.0, false);
    build(b);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  Variant variant() const { return cfg_.variant; }
  std::size_t classes() const { return cfg_.classes; }
  data::ChannelForm required_form() const { return models::required_form(cfg_.variant); }
  ParameterStore<T>& parameters() { return store_; }
  const ParameterStore<T>& parameters() const { return store_; }
  const std::vector<HeadInfo>& heads() const { return heads_; }

  /// Channels entering the classifier after fusion (0 for models without one).
  std::size_t fusion_channels() const { return fusion_channels_; }

  void set_input_stats(const data::ChannelStats& s) {
    if (s.mean.size() != cfg_.input_channels || s.stddev.size() != cfg_.input_channels)
      throw DataError("input statistics channel count mismatch");
    for (std::size_t c = 0; c < cfg_.input_channels; ++c) {
      input_mean_->value[c] = static_cast<T>(s.mean[c]);
      input_std_->value[c] = static_cast<T>(s.stddev[c] > 0.0 ? s.stddev[c] : 1.0);
    }
  }

  void check_input(const data::ChannelCube& cube) const {
    if (cube.channels != cfg_.input_channels)
      throw DataError("model expects " + std::to_string(cfg_.input_channels) +
                      " input channels, cube has " + std::to_string(cube.channels));
    if (cube.form != required_form())
      throw DataError(to_string(cfg_.variant) + " needs a " + data::to_string(required_form()) +
                      " cube, got " + data::to_string(cube.form));
  }

  /// One pre-softmax [N, c] tensor per head, in heads() order.
  std::vector<Var> forward(Graph<T>& g, Tensor<T> batch) const {
    const auto& s = batch.shape();
    if (s.rank() != 4 || s[1] != cfg_.input_channels || s[2] != cfg_.patch || s[3] != cfg_.patch)
      throw ShapeError("model input must be [N, " + std::to_string(cfg_.input_channels) + ", " +
                       std::to_string(cfg_.patch) + ", " + std::to_string(cfg_.patch) +
                       "], got " + s.str());
    const std::size_t plane = s[2] * s[3];
    for (std::size_t n = 0; n < s[0]; ++n)
      for (std::size_t c = 0; c < s[1]; ++c) {
        const T mu = input_mean_->value[c], sd = input_std_->value[c];
        T* p = batch.data() + (n * s[1] + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - mu) / sd;
      }
    Var x = g.constant(std::move(batch), "input");

    switch (cfg_.variant) {
      case Variant::CNN_v1:
      case Variant::CNN_v2: {
        Var h = x;
        for (const auto& layer : cnn_) h = ad::max_pool(g, layer.forward(g, h));
        return {head_main_->forward(g, h)};
      }
      case Variant::VGG_v1:
      case Variant::VGG_v2:
        return {head_main_->forward(g, vgg_->forward(g, x).block3)};
      default:
        break;
    }

    Var amp_in = ad::slice_channels(g, x, 0, 6);
    Var pha_in = ad::slice_channels(g, x, 6, 3);
    const auto pf = phase_->forward(g, pha_in);
    const auto af = amp_->forward(g, amp_in);
    auto pick = [&](const typename Branch<T>::Features& f) {
      return cfg_.fusion_source == FusionSource::block2 ? f.block2 : f.block3;
    };

    switch (cfg_.variant) {
      case Variant::M1:
        return {head_phase_->forward(g, pf.block3), head_amp_->forward(g, af.block3)};
      case Variant::M2:
        return {head_fusion_->forward(g, fusion_conv_->forward(
                                             g, ad::concat_channels(g, {pick(pf), pick(af)})))};
      case Variant::M3:
        return {head_fusion_->forward(
            g, dense_->forward(g, ad::concat_channels(g, {pick(pf), pick(af)})))};
      case Variant::M4:
        return {head_phase_->forward(g, pf.block3), head_amp_->forward(g, af.block3),
                head_fusion_->forward(
                    g, dense_->forward(g, ad::concat_channels(g, {pick(pf), pick(af)})))};
      default: {
        Var v1 = head_phase_->forward(g, pf.block3);
        Var v2 = head_amp_->forward(g, af.block3);
        Var v3 = head_fusion_->forward(
            g, dense_->forward(g, ad::concat_channels(g, {pick(pf), pick(af)})));
        Var vm = weighted_sum_->forward(g, {v1, v2, v3});
        return {v1, v2, v3, vm};
      }
    }
  }

  /// Cross-entropy of every head against 1-based labels, unweighted.
  std::vector<Var> head_losses(Graph<T>& g, const std::vector<Var>& logits,
                               std::span<const std::uint16_t> labels) const {
    std::vector<std::size_t> zero_based(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == 0) throw DataError("unlabeled sample (class 0) in a loss computation");
      if (labels[i] > cfg_.classes)
        throw DataError("label " + std::to_string(labels[i]) + " exceeds class count " +
                        std::to_string(cfg_.classes));
      zero_based[i] = labels[i] - 1u;
    }
    std::vector<Var> out;
    for (auto v : logits) out.push_back(ad::softmax_cross_entropy<T>(g, v, zero_based));
    return out;
  }

  /// Sum of head losses, each scaled by its weight.
  Var loss(Graph<T>& g, const std::vector<Var>& logits, std::span<const std::uint16_t> labels) const {
    const auto parts = head_losses(g, logits, labels);
    Var total;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      Var term = heads_[i].loss_weight == 1.0
                     ? parts[i]
                     : ad::scale(g, parts[i], static_cast<T>(heads_[i].loss_weight));
      total = total.valid() ? ad::add(g, total, term) : term;
    }
    return total;
  }

  /// Mean of the head softmax distributions, [N, c].
  Tensor<T> probabilities(const Graph<T>& g, const std::vector<Var>& logits) const {
    const auto& s = g.value(logits.front()).shape();
    Tensor<T> mean(s);
    Tensor<T> p(s);
    for (auto v : logits) {
      ad::detail::softmax_rows(g.value(v).data(), s[0], s[1], p.data());
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += p[i];
    }
    const T inv = T{1} / static_cast<T>(logits.size());
    for (auto& m : mean.vec()) m *= inv;
    return mean;
  }

  /// Trainable scalar count under a name prefix such as "phase_branch/".
  std::size_t parameter_count(std::string_view prefix = {}) const {
    return store_.count_trainable(prefix);
  }

 private:
  void build(nn::Builder<T>& b) {
    const auto& c = cfg_;
    const std::size_t side = Branch<T>::output_side(c.patch);
    switch (c.variant) {
      case Variant::CNN_v1:
      case Variant::CNN_v2: {
        std::size_t in = c.input_channels, s = c.patch;
        for (std::size_t i = 0; i < 3; ++i) {
          // single-layer blocks: each conv is the last of its block, so no dropout
          cnn_.emplace_back(b, "cnn/conv" + std::to_string(i + 1), nn::ConvKind::vanilla, in,
                            c.widths[i], 0.0);
          in = c.widths[i];
          s /= 2;
        }
        if (s == 0) throw DataError("patch too small for three pooling stages");
        head_main_.emplace(b, "head", in * s * s, c.fc_width, c.classes, c.fc_drop);
        heads_ = {{"main", 1.0}};
        return;
      }
      case Variant::VGG_v1:
      case Variant::VGG_v2:
        vgg_.emplace(b, "vgg_branch",
                     BranchConfig{c.input_channels, c.widths, nn::ConvKind::vanilla, c.conv_drop});
        head_main_.emplace(b, "head", c.widths[2] * side * side, c.fc_width, c.classes, c.fc_drop);
        heads_ = {{"main", 1.0}};
        return;
      default:
        break;
    }
    if (c.input_channels != 9) throw DataError("two-branch models need 9 input channels");
    if (side == 0) throw DataError("patch too small for two pooling stages");

    const auto phase_kind = (c.variant == Variant::DMCNN || c.variant == Variant::M6)
                                ? nn::ConvKind::depthwise_separable
                                : nn::ConvKind::vanilla;
    phase_.emplace(b, "phase_branch", BranchConfig{3, c.widths, phase_kind, c.conv_drop});
    amp_.emplace(b, "amp_branch", BranchConfig{6, c.widths, nn::ConvKind::vanilla, c.conv_drop});

    const std::size_t branch_flat = c.widths[2] * side * side;
    const bool from_b2 = c.fusion_source == FusionSource::block2;
    const std::size_t fuse_in = from_b2 ? 2 * c.widths[1] : 2 * c.widths[2];
    const std::size_t fuse_side = from_b2 ? c.patch / 2 : side;

    auto side_heads = [&] {
      head_phase_.emplace(b, "phase_head", branch_flat, c.fc_width, c.classes, c.fc_drop);
      head_amp_.emplace(b, "amp_head", branch_flat, c.fc_width, c.classes, c.fc_drop);
    };
    auto dense_fusion = [&] {
      dense_.emplace(b, "fusion/dense", fuse_in, c.dense, c.conv_drop);
      fusion_channels_ = dense_->out_channels();
      head_fusion_.emplace(b, "fusion_head", fusion_channels_ * fuse_side * fuse_side,
                           c.fc_width, c.classes, c.fc_drop);
    };

    switch (c.variant) {
      case Variant::M1:
        side_heads();
        heads_ = {{"phase", 1.0}, {"amplitude", 1.0}};
        break;
      case Variant::M2:
        fusion_conv_.emplace(b, "fusion/conv", nn::ConvKind::vanilla, fuse_in, 2 * c.widths[2],
                             0.0);
        fusion_channels_ = 2 * c.widths[2];
        head_fusion_.emplace(b, "fusion_head", fusion_channels_ * fuse_side * fuse_side,
                             c.fc_width, c.classes, c.fc_drop);
        heads_ = {{"fusion", 1.0}};
        break;
      case Variant::M3:
        dense_fusion();
        heads_ = {{"fusion", 1.0}};
        break;
      case Variant::M4:
        side_heads();
        dense_fusion();
        heads_ = {{"phase", c.alpha[0]}, {"amplitude", c.alpha[1]}, {"fusion", 1.0}};
        break;
      default:
        side_heads();
        dense_fusion();
        weighted_sum_.emplace(b, "main/weighted_sum", 3);
        heads_ = {{"phase", c.alpha[0]},
                  {"amplitude", c.alpha[1]},
                  {"fusion", c.alpha[2]},
                  {"main", 1.0}};
        break;
    }
  }

  ModelConfig cfg_;
  ParameterStore<T> store_;
  ad::Parameter<T>* input_mean_ = nullptr;
  ad::Parameter<T>* input_std_ = nullptr;
  std::vector<HeadInfo> heads_;
  std::size_t fusion_channels_ = 0;

  std::vector<nn::CompositeConv<T>> cnn_;
  std::optional<Branch<T>> vgg_, phase_, amp_;
  std::optional<nn::CompositeConv<T>> fusion_conv_;
  std::optional<nn::DenseBlock<T>> dense_;
  std::optional<Head<T>> head_main_, head_phase_, head_amp_, head_fusion_;
  std::optional<nn::WeightedSumLayer<T>> weighted_sum_;
};

}  // namespace polsar::models
