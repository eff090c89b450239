#include <gtest/gtest.h>

#include <cmath>

#include "polsar/autodiff/ops.hpp"
#include "polsar/nn/layers.hpp"

using namespace polsar;
using ad::Graph;
using ad::ParameterStore;
using ad::Var;

namespace {

// Direct SAME cross-correlation, one output element at a time.
template <class T>
Tensor<T> conv_oracle(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias) {
  const std::size_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
  const std::size_t k = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
  Tensor<T> y(Shape{n, k, h, wd});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < k; ++o)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < wd; ++j) {
          double s = bias ? (*bias)[o] : 0.0;
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long yy = long(i) + long(u) - long(kh / 2);
                const long xx = long(j) + long(v) - long(kw / 2);
                if (yy < 0 || xx < 0 || yy >= long(h) || xx >= long(wd)) continue;
                s += double(x.at(b, ch, yy, xx)) * w[((o * c + ch) * kh + u) * kw + v];
              }
          y.at(b, o, i, j) = static_cast<T>(s);
        }
  return y;
}

// Per-channel 3x3 filtering followed by a naive 1x1 mix plus bias.
template <class T>
Tensor<T> separable_oracle(const Tensor<T>& x, const Tensor<T>& dw, const Tensor<T>& pw,
                           const Tensor<T>& bias) {
  const std::size_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
  Tensor<T> mid(x.shape());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      Tensor<T> plane(Shape{1, 1, h, wd});
      for (std::size_t i = 0; i < h * wd; ++i) plane[i] = x[(b * c + ch) * h * wd + i];
      Tensor<T> kern(Shape{1, 1, 3, 3});
      for (std::size_t i = 0; i < 9; ++i) kern[i] = dw[ch * 9 + i];
      const auto out = conv_oracle(plane, kern, static_cast<const Tensor<T>*>(nullptr));
      for (std::size_t i = 0; i < h * wd; ++i) mid[(b * c + ch) * h * wd + i] = out[i];
    }
  const std::size_t k = pw.shape()[0];
  Tensor<T> y(Shape{n, k, h, wd});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < k; ++o)
      for (std::size_t p = 0; p < h * wd; ++p) {
        double s = bias[o];
        for (std::size_t ch = 0; ch < c; ++ch) s += double(pw[o * c + ch]) * mid[(b * c + ch) * h * wd + p];
        y[(b * k + o) * h * wd + p] = static_cast<T>(s);
      }
  return y;
}

template <class T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(double(a[i]) - double(b[i])));
  return d;
}

}  // namespace

TEST(Conv2d, DeltaKernelIsIdentity) {
  auto x = Tensor<float>::create(Shape{2, 1, 5, 6}, fill::Gaussian{0, 1, 1});
  Tensor<float> w(Shape{1, 1, 3, 3});
  w[4] = 1.0f;
  Graph<float> g;
  EXPECT_EQ(g.value(ad::conv2d(g, g.constant(x), g.constant(w))), x);
}

TEST(Conv2d, OnesKernelBoxSum) {
  Tensor<float> x(Shape{1, 1, 5, 5}, 1.0f);
  Tensor<float> w(Shape{1, 1, 3, 3}, 1.0f);
  Graph<float> g;
  const auto& y = g.value(ad::conv2d(g, g.constant(x), g.constant(w)));
  for (std::size_t i = 1; i < 4; ++i)
    for (std::size_t j = 1; j < 4; ++j) EXPECT_EQ(y.at(0, 0, i, j), 9.0f);
  EXPECT_EQ(y.at(0, 0, 0, 0), 4.0f);  // zero padding at the corner
  EXPECT_EQ(y.at(0, 0, 0, 2), 6.0f);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  Rng rng(3);
  int trial = 0;
  for (std::size_t c : {1, 3, 6, 9})
    for (std::size_t k : {1, 12, 32, 64}) {
      const std::size_t n = 1 + rng.below(3), h = 3 + rng.below(12), w = 3 + rng.below(12);
      auto x = Tensor<float>::create(Shape{n, c, h, w}, fill::Uniform{-1, 1, 10u + trial});
      auto wt = Tensor<float>::create(Shape{k, c, 3, 3}, fill::Uniform{-1, 1, 50u + trial});
      auto b = Tensor<float>::create(Shape{k}, fill::Uniform{-1, 1, 90u + trial});
      ++trial;
      Graph<float> g;
      const auto& y = g.value(ad::conv2d(g, g.constant(x), g.constant(wt), g.constant(b)));
      EXPECT_LT(max_abs_diff(y, conv_oracle(x, wt, &b)), 1e-5) << "c=" << c << " k=" << k;
    }
}

TEST(Conv2d, TwoToFourOnSixBySix) {
  auto x = Tensor<float>::create(Shape{1, 2, 6, 6}, fill::Gaussian{0, 1, 4});
  auto w = Tensor<float>::create(Shape{4, 2, 3, 3}, fill::Gaussian{0, 1, 5});
  auto b = Tensor<float>::create(Shape{4}, fill::Gaussian{0, 1, 6});
  Graph<float> g;
  EXPECT_LT(max_abs_diff(g.value(ad::conv2d(g, g.constant(x), g.constant(w), g.constant(b))),
                         conv_oracle(x, w, &b)),
            1e-5);
}

TEST(Conv2d, ChannelMismatchIsAnError) {
  Graph<float> g;
  Var x = g.constant(Tensor<float>(Shape{1, 2, 4, 4}));
  Var w = g.constant(Tensor<float>(Shape{3, 3, 3, 3}));
  EXPECT_THROW(ad::conv2d(g, x, w), ShapeError);
}

TEST(DepthwiseSeparable, DoubleIdentity) {
  ParameterStore<float> ps;
  nn::Builder<float> b(ps, 1);
  nn::DepthwiseSeparableConvLayer<float> layer(b, "sep", 3, 3);
  layer.depthwise().value.fill_value(0);
  for (std::size_t c = 0; c < 3; ++c) layer.depthwise().value[c * 9 + 4] = 1;
  layer.pointwise().value.fill_value(0);
  for (std::size_t c = 0; c < 3; ++c) layer.pointwise().value[c * 3 + c] = 1;
  auto x = Tensor<float>::create(Shape{2, 3, 5, 4}, fill::Gaussian{0, 1, 2});
  Graph<float> g;
  EXPECT_EQ(g.value(layer.forward(g, g.constant(x))), x);
}

TEST(DepthwiseSeparable, MatchesTwoStageOracle) {
  int trial = 0;
  for (std::size_t c : {1, 3, 6, 9})
    for (std::size_t k : {1, 12, 32, 64}) {
      ParameterStore<float> ps;
      nn::Builder<float> b(ps, 7u + trial);
      nn::DepthwiseSeparableConvLayer<float> layer(b, "sep", c, k);
      layer.bias().value = Tensor<float>::create(Shape{k}, fill::Uniform{-1, 1, 3u + trial});
      auto x = Tensor<float>::create(Shape{2, c, 7, 9}, fill::Uniform{-1, 1, 40u + trial});
      ++trial;
      Graph<float> g;
      const auto& y = g.value(layer.forward(g, g.constant(x)));
      EXPECT_LT(max_abs_diff(y, separable_oracle(x, layer.depthwise().value, layer.pointwise().value,
                                                 layer.bias().value)),
                1e-5)
          << "c=" << c << " k=" << k;
    }
}

TEST(DepthwiseSeparable, ParameterCounts) {
  ParameterStore<float> ps;
  nn::Builder<float> b(ps, 1);
  nn::DepthwiseSeparableConvLayer<float> sep(b, "sep", 9, 32);
  nn::Conv2DLayer<float> vanilla(b, "conv", 9, 32);
  EXPECT_EQ(sep.weight_count(), 369u);
  EXPECT_EQ(vanilla.parameter_count() - vanilla.out_channels(), 2592u);
  for (std::size_t c : {1, 3, 9, 24})
    for (std::size_t k : {2, 12, 32, 64}) {
      ParameterStore<float> s2;
      nn::Builder<float> b2(s2, 1);
      nn::DepthwiseSeparableConvLayer<float> l(b2, "s", c, k);
      EXPECT_EQ(l.weight_count(), 9 * c + c * k);
      EXPECT_LT(l.weight_count(), 9 * c * k);
    }
  nn::Conv2DLayer<float> first(b, "first", 6, 32);
  EXPECT_EQ(first.parameter_count(), 1760u);
}

TEST(MaxPool, ValuesAndFloorChain) {
  Graph<float> g;
  Var x = g.constant(Tensor<float>(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4}));
  EXPECT_EQ(g.value(ad::max_pool(g, x)).vec(), std::vector<float>{4});
  Var c = g.constant(Tensor<float>(Shape{2, 3, 6, 6}, 2.5f));
  for (auto v : g.value(ad::max_pool(g, c)).span()) EXPECT_EQ(v, 2.5f);
  Var p = g.constant(Tensor<float>(Shape{1, 4, 14, 14}));
  Var p1 = ad::max_pool(g, p);
  Var p2 = ad::max_pool(g, p1);
  EXPECT_EQ(g.value(p1).shape(), (Shape{1, 4, 7, 7}));
  EXPECT_EQ(g.value(p2).shape(), (Shape{1, 4, 3, 3}));
}

TEST(MaxPool, TiesRouteGradientToFirstInRowMajor) {
  Graph<double> g;
  Var x = g.leaf(Tensor<double>(Shape{1, 1, 2, 2}, 1.0));
  g.backward(ad::sum(g, ad::max_pool(g, x)));
  EXPECT_EQ(g.grad(x).vec(), (std::vector<double>{1, 0, 0, 0}));
}

TEST(BatchNorm, TrainingStandardizesPerChannel) {
  ParameterStore<double> ps;
  nn::Builder<double> b(ps, 1);
  nn::BatchNormLayer<double> bn(b, "bn", 3);
  auto x = Tensor<double>::create(Shape{4, 3, 5, 5}, fill::Gaussian{2, 3, 8});
  Graph<double> g(ad::Mode::train);
  const auto& y = g.value(bn.forward(g, g.constant(x)));
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0, sq = 0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 25; ++i) s += y[(n * 3 + c) * 25 + i];
    const double mean = s / 100;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 25; ++i) sq += std::pow(y[(n * 3 + c) * 25 + i] - mean, 2);
    EXPECT_NEAR(mean, 0, 1e-5);
    EXPECT_NEAR(sq / 100, 1, 1e-3);
  }
  // Running statistics move a tenth of the way toward the batch statistics.
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_GT(bn.running_mean().value[c], 0.0);
    EXPECT_LT(bn.running_mean().value[c], 0.5);
  }
}

TEST(BatchNorm, AffineScaleShift) {
  ParameterStore<double> ps;
  nn::Builder<double> b(ps, 1);
  nn::BatchNormLayer<double> bn(b, "bn", 2);
  bn.scale().value.fill_value(2);
  bn.shift().value.fill_value(3);
  auto x = Tensor<double>::create(Shape{8, 2}, fill::Gaussian{0, 1, 3});
  Graph<double> g(ad::Mode::train);
  const auto& y = g.value(bn.forward(g, g.constant(x)));
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, sq = 0;
    for (std::size_t n = 0; n < 8; ++n) s += y[n * 2 + c];
    for (std::size_t n = 0; n < 8; ++n) sq += std::pow(y[n * 2 + c] - s / 8, 2);
    EXPECT_NEAR(s / 8, 3, 1e-9);
    EXPECT_NEAR(std::sqrt(sq / 8), 2, 1e-4);
  }
}

TEST(BatchNorm, InferenceUsesRunningStats) {
  ParameterStore<float> ps;
  nn::Builder<float> b(ps, 1);
  nn::BatchNormLayer<float> bn(b, "bn", 2);
  bn.running_mean().value = Tensor<float>::from({1.5f, -2});
  bn.shift().value = Tensor<float>::from({0.25f, 7});
  Tensor<float> x(Shape{1, 2, 3, 3});
  for (std::size_t i = 0; i < 9; ++i) {
    x[i] = 1.5f;
    x[9 + i] = -2;
  }
  Graph<float> g(ad::Mode::infer);
  const auto& y = g.value(bn.forward(g, g.constant(x)));
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(y[i], 0.25f);
    EXPECT_EQ(y[9 + i], 7.0f);
  }
}

TEST(BatchNorm, SingleSampleTrainingIsAnError) {
  ParameterStore<float> ps;
  nn::Builder<float> b(ps, 1);
  nn::BatchNormLayer<float> bn(b, "bn", 2);
  Graph<float> g(ad::Mode::train);
  EXPECT_THROW(bn.forward(g, g.constant(Tensor<float>(Shape{1, 2, 3, 3}))), ShapeError);
}

TEST(Dropout, InferenceIsIdentity) {
  auto x = Tensor<float>::create(Shape{3, 7}, fill::Gaussian{0, 1, 1});
  Graph<float> g(ad::Mode::infer, 5);
  EXPECT_EQ(g.value(nn::DropoutLayer{0.5}.forward(g, g.constant(x))), x);
}

TEST(Dropout, InvertedScalingPreservesMean) {
  for (double p : {0.2, 0.5}) {
    Tensor<double> x(Shape{100000}, 1.5);
    Graph<double> g(ad::Mode::train, 17);
    const auto& y = g.value(ad::dropout(g, g.constant(x), p));
    double s = 0;
    std::size_t zeros = 0;
    for (auto v : y.span()) {
      s += v;
      zeros += v == 0.0;
      if (v != 0.0) EXPECT_DOUBLE_EQ(v, 1.5 / (1 - p));
    }
    EXPECT_NEAR(s / 1e5, 1.5, 0.02 * 1.5) << "p=" << p;
    EXPECT_NEAR(double(zeros) / 1e5, p, 0.01);
  }
}

TEST(DenseBlock, OutputChannelsFollowConcatenation) {
  EXPECT_EQ((nn::DenseBlockConfig{5, 16, 4}.output_channels(128)), 256u);
  EXPECT_EQ((nn::DenseBlockConfig{5, 12, 2}.output_channels(48)), 120u);
  ParameterStore<float> ps;
  nn::Builder<float> b(ps, 3);
  nn::DenseBlock<float> block(b, "dense", 48, {5, 12, 2}, 0.2);
  auto x = Tensor<float>::create(Shape{2, 48, 3, 3}, fill::Gaussian{0, 1, 4});
  Graph<float> g(ad::Mode::train, 9);
  const auto& y = g.value(block.forward(g, g.constant(x)));
  ASSERT_EQ(y.shape(), (Shape{2, 120, 3, 3}));
  EXPECT_EQ(block.out_channels(), 120u);
  // Leading channel slice is the input, bit-exact.
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 48 * 9; ++i) EXPECT_EQ(y[n * 120 * 9 + i], x[n * 48 * 9 + i]);
}

TEST(FullyConnected, IdentityZeroAndOracle) {
  ParameterStore<double> ps;
  nn::Builder<double> b(ps, 1);
  nn::FullyConnectedLayer<double> fc(b, "fc", 4, 4);
  fc.weight().value.fill_value(0);
  for (std::size_t i = 0; i < 4; ++i) fc.weight().value[i * 4 + i] = 1;
  auto x = Tensor<double>::create(Shape{3, 4}, fill::Gaussian{0, 1, 2});
  {
    Graph<double> g;
    EXPECT_EQ(g.value(fc.forward(g, g.constant(x))), x);
  }
  fc.weight().value.fill_value(0);
  fc.bias().value = Tensor<double>::from({1, -2, 3, 0.5});
  {
    Graph<double> g;
    const auto& y = g.value(fc.forward(g, g.constant(x)));
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(y[n * 4 + j], fc.bias().value[j]);
  }
  nn::FullyConnectedLayer<double> rnd(b, "rnd", 4, 6);
  Graph<double> g;
  const auto& y = g.value(rnd.forward(g, g.constant(x)));
  const auto ref = map_binary(matmul(x, rnd.weight().value), rnd.bias().value, BinaryOp::add);
  EXPECT_LT(max_abs_diff(y, ref), 1e-6);
  // 4-D input is flattened per sample.
  Graph<double> g4;
  const auto& y4 = g4.value(rnd.forward(g4, g4.constant(x.reshaped(Shape{3, 1, 2, 2}))));
  EXPECT_EQ(y4, y);
  Graph<double> bad;
  EXPECT_THROW(rnd.forward(bad, bad.constant(Tensor<double>(Shape{3, 5}))), ShapeError);
}

TEST(Softmax, SymmetryStabilityShiftInvariance) {
  Graph<double> g;
  const auto& u = g.value(ad::softmax(g, g.constant(Tensor<double>(Shape{1, 3}, 0.0))));
  for (auto v : u.span()) EXPECT_NEAR(v, 1.0 / 3, 1e-15);
  const auto& big = g.value(ad::softmax(g, g.constant(Tensor<double>(Shape{1, 2}, std::vector<double>{1000, 0}))));
  EXPECT_EQ(big[0], 1.0);
  EXPECT_EQ(big[1], 0.0);
  auto x = Tensor<float>::create(Shape{4, 5}, fill::Uniform{-3, 3, 1});
  Graph<float> gf;
  const auto a = gf.value(ad::softmax(gf, gf.constant(x)));
  const auto b = gf.value(ad::softmax(gf, gf.constant(map_binary(x, Tensor<float>::from({7.25f}), BinaryOp::add))));
  EXPECT_LT(max_abs_diff(a, b), 1e-7);
}

TEST(Softmax, RowsSumToOneForLargeLogits) {
  auto x = Tensor<double>::create(Shape{50, 15}, fill::Uniform{-1000, 1000, 4});
  Graph<double> g;
  const auto& y = g.value(ad::softmax(g, g.constant(x)));
  for (std::size_t r = 0; r < 50; ++r) {
    double s = 0;
    for (std::size_t j = 0; j < 15; ++j) {
      EXPECT_TRUE(std::isfinite(y[r * 15 + j]));
      s += y[r * 15 + j];
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(WeightedSum, SelectorAverageAndGradient) {
  ParameterStore<double> ps;
  nn::Builder<double> b(ps, 1);
  nn::WeightedSumLayer<double> ws(b, "ws");
  EXPECT_EQ(ws.weights().value.vec(), std::vector<double>(3, 1.0 / 3));
  auto v1 = Tensor<double>::create(Shape{2, 3}, fill::Gaussian{0, 1, 1});
  auto v2 = Tensor<double>::create(Shape{2, 3}, fill::Gaussian{0, 1, 2});
  auto v3 = Tensor<double>::create(Shape{2, 3}, fill::Gaussian{0, 1, 3});
  {
    Graph<double> g;
    Var v = g.constant(v1);
    EXPECT_LT(max_abs_diff(g.value(ws.forward(g, {v, v, v})), v1), 1e-15);
  }
  ws.weights().value = Tensor<double>::from({1, 0, 0});
  Graph<double> g;
  Var out = ws.forward(g, {g.constant(v1), g.constant(v2), g.constant(v3)});
  EXPECT_EQ(g.value(out), v1);
  // d sum(out) / d w_i = sum(v_i)
  g.backward(ad::sum(g, out));
  EXPECT_NEAR(ws.weights().grad[0], sum(v1), 1e-12);
  EXPECT_NEAR(ws.weights().grad[1], sum(v2), 1e-12);
  EXPECT_NEAR(ws.weights().grad[2], sum(v3), 1e-12);
  Graph<double> bad;
  EXPECT_THROW(ws.forward(bad, {bad.constant(v1), bad.constant(v2),
                                bad.constant(Tensor<double>(Shape{3, 3}))}),
               ShapeError);
}
