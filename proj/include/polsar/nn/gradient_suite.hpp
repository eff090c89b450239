#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <vector>

#include "polsar/autodiff/gradient_check.hpp"
#include "polsar/nn/layers.hpp"

namespace polsar::nn {

/// Finite-difference checks of every layer op on three shapes each, in double
/// precision.
inline std::vector<ad::GradCheckReport> run_gradient_suite(std::uint64_t seed = 1,
                                                           double tolerance = 1e-4,
                                                           std::ostream* log = nullptr) {
  using ad::GradCheckOptions;
  using ad::ParameterStore;
  std::vector<ad::GradCheckReport> out;
  auto record = [&](ad::GradCheckReport r) {
    if (log) *log << r;
    out.push_back(std::move(r));
  };
  GradCheckOptions opt;
  opt.tolerance = tolerance;
  opt.seed = seed;

  struct ConvCase {
    std::size_t n, c, h, w, k;
  };
  const std::array<ConvCase, 3> conv_cases{{{1, 2, 6, 6, 3}, {2, 3, 5, 7, 4}, {2, 1, 4, 4, 2}}};

  for (const auto& cc : conv_cases) {
    ParameterStore<double> store;
    Builder<double> b(store, seed);
    Conv2DLayer<double> layer(b, "conv", cc.c, cc.k);
    record(ad::gradient_check(
        "conv2d " + Shape{cc.n, cc.c, cc.h, cc.w}.str() + " -> " + std::to_string(cc.k),
        {Shape{cc.n, cc.c, cc.h, cc.w}}, store,
        [&](Graph<double>& g, std::span<const Var> in) { return layer.forward(g, in[0]); }, opt));
  }

  const std::array<ConvCase, 3> sep_cases{{{1, 3, 8, 8, 4}, {2, 1, 5, 5, 3}, {1, 9, 4, 6, 2}}};
  for (const auto& cc : sep_cases) {
    ParameterStore<double> store;
    Builder<double> b(store, seed);
    DepthwiseSeparableConvLayer<double> layer(b, "sep", cc.c, cc.k);
    record(ad::gradient_check(
        "depthwise_separable " + Shape{cc.n, cc.c, cc.h, cc.w}.str() + " -> " +
            std::to_string(cc.k),
        {Shape{cc.n, cc.c, cc.h, cc.w}}, store,
        [&](Graph<double>& g, std::span<const Var> in) { return layer.forward(g, in[0]); }, opt));
  }

  for (const auto& s : {Shape{1, 2, 4, 4}, Shape{2, 3, 6, 6}, Shape{1, 1, 7, 5}}) {
    ParameterStore<double> store;
    record(ad::gradient_check(
        "max_pool " + s.str(), {s}, store,
        [](Graph<double>& g, std::span<const Var> in) { return ad::max_pool(g, in[0]); }, opt));
  }

  for (const auto& s : {Shape{4, 3, 3, 3}, Shape{2, 2, 4, 4}, Shape{5, 4}}) {
    ParameterStore<double> store;
    Builder<double> b(store, seed);
    BatchNormLayer<double> layer(b, "bn", s[1]);
    layer.scale().value = Tensor<double>::create(Shape{s[1]}, fill::Uniform{0.5, 1.5, seed + 3});
    layer.shift().value = Tensor<double>::create(Shape{s[1]}, fill::Uniform{-0.5, 0.5, seed + 4});
    record(ad::gradient_check(
        "batch_norm(train) " + s.str(), {s}, store,
        [&](Graph<double>& g, std::span<const Var> in) { return layer.forward(g, in[0]); }, opt));
  }

  {
    auto eval = opt;
    eval.mode = ad::Mode::infer;
    for (const auto& s : {Shape{2, 3, 4, 4}, Shape{6, 5}, Shape{1, 2, 3, 3}}) {
      ParameterStore<double> store;
      record(ad::gradient_check(
          "dropout(eval) " + s.str(), {s}, store,
          [](Graph<double>& g, std::span<const Var> in) { return ad::dropout(g, in[0], 0.5); },
          eval));
    }
    // Training-mode dropout with a fixed mask is linear in its input.
    for (const auto& s : {Shape{3, 8}, Shape{2, 2, 3, 3}, Shape{4, 5}}) {
      ParameterStore<double> store;
      record(ad::gradient_check(
          "dropout(train, fixed mask) " + s.str(), {s}, store,
          [](Graph<double>& g, std::span<const Var> in) { return ad::dropout(g, in[0], 0.2); },
          opt));
    }
  }

  for (const auto& [n, din, dout] :
       std::array<std::array<std::size_t, 3>, 3>{{{3, 5, 4}, {1, 7, 2}, {4, 2, 6}}}) {
    ParameterStore<double> store;
    Builder<double> b(store, seed);
    FullyConnectedLayer<double> layer(b, "fc", din, dout);
    record(ad::gradient_check(
        "fully_connected " + Shape{n, din}.str() + " -> " + std::to_string(dout), {Shape{n, din}},
        store, [&](Graph<double>& g, std::span<const Var> in) { return layer.forward(g, in[0]); },
        opt));
  }

  for (const auto& s : {Shape{4, 3}, Shape{2, 5}, Shape{6, 2}}) {
    ParameterStore<double> store;
    std::vector<std::size_t> labels(s[0]);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = (i * 7 + 1) % s[1];
    record(ad::gradient_check(
        "softmax_cross_entropy " + s.str(), {s}, store,
        [&](Graph<double>& g, std::span<const Var> in) {
          return ad::softmax_cross_entropy<double>(g, in[0], labels);
        },
        opt));
    record(ad::gradient_check(
        "softmax " + s.str(), {s}, store,
        [](Graph<double>& g, std::span<const Var> in) { return ad::softmax(g, in[0]); }, opt));
  }

  struct DenseCase {
    std::size_t n, c, side;
    DenseBlockConfig cfg;
  };
  const std::array<DenseCase, 3> dense_cases{
      {{2, 3, 3, {2, 2, 2}}, {3, 2, 4, {3, 2, 1}}, {2, 4, 2, {5, 1, 2}}}};
  for (const auto& dc : dense_cases) {
    ParameterStore<double> store;
    Builder<double> b(store, seed);
    DenseBlock<double> block(b, "dense", dc.c, dc.cfg, 0.0);
    const Shape s{dc.n, dc.c, dc.side, dc.side};
    record(ad::gradient_check(
        "dense_block " + s.str() + " L=" + std::to_string(dc.cfg.layers), {s}, store,
        [&](Graph<double>& g, std::span<const Var> in) { return block.forward(g, in[0]); }, opt));
  }

  for (const auto& s : {Shape{2, 3}, Shape{4, 5}, Shape{1, 7}}) {
    ParameterStore<double> store;
    Builder<double> b(store, seed);
    WeightedSumLayer<double> layer(b, "wsum", 3);
    layer.weights().value = Tensor<double>::create(Shape{3}, fill::Uniform{-1.0, 1.0, seed + 5});
    record(ad::gradient_check(
        "weighted_sum " + s.str(), {s, s, s}, store,
        [&](Graph<double>& g, std::span<const Var> in) {
          return layer.forward(g, {in[0], in[1], in[2]});
        },
        opt));
  }

  for (const auto& s : {Shape{2, 3, 4, 4}, Shape{3, 6}, Shape{1, 1, 5, 5}}) {
    ParameterStore<double> store;
    record(ad::gradient_check(
        "relu " + s.str(), {s}, store,
        [](Graph<double>& g, std::span<const Var> in) { return ad::relu(g, in[0]); }, opt));
  }
  return out;
}

}  // namespace polsar::nn
