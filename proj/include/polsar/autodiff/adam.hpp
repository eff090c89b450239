#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "polsar/autodiff/graph.hpp"

namespace polsar::ad {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments are keyed by parameter name and created
/// lazily for every trainable parameter of the store.
template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return t_; }

  struct Moments {
    std::string name;
    Tensor<T> m, v;
  };
  const std::vector<Moments>& moments() const { return moments_; }

  /// Restore from a checkpoint.
  void restore(std::uint64_t t, std::vector<Moments> moments) {
    t_ = t;
    moments_ = std::move(moments);
  }

  /// Apply one update from the accumulated gradients, then zero them.
  void step(ParameterStore<T>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t slot = 0;
    for (auto& pp : params) {
      auto& p = *pp;
      if (!p.trainable) continue;
      if (slot == moments_.size())
        moments_.push_back({p.name, Tensor<T>(p.value.shape()), Tensor<T>(p.value.shape())});
      auto& mo = moments_[slot++];
      if (mo.name != p.name || !(mo.m.shape() == p.value.shape()) ||
          !(mo.v.shape() == p.value.shape()))
        throw ShapeError("adam: moment state drifted from parameter " + p.name);
      auto& w = p.value.vec();
      auto& g = p.grad.vec();
      auto& m = mo.m.vec();
      auto& v = mo.v.vec();
      const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
      const T lr = static_cast<T>(cfg_.lr), eps = static_cast<T>(cfg_.epsilon);
      const T ibc1 = static_cast<T>(1.0 / bc1), ibc2 = static_cast<T>(1.0 / bc2);
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = b1 * m[i] + (T{1} - b1) * g[i];
        v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
        const T mhat = m[i] * ibc1;
        const T vhat = v[i] * ibc2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        g[i] = T{0};
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<Moments> moments_;
};

}  // namespace polsar::ad
