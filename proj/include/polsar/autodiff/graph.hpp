#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "polsar/core/error.hpp"
#include "polsar/core/rng.hpp"
#include "polsar/core/tensor.hpp"

namespace polsar::ad {

enum class Mode { train, infer };

/// A named model tensor. Non-trainable parameters carry state that must be
/// checkpointed but never optimized (batch-norm running statistics, input
/// normalization).
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
};

/// Insertion-ordered, name-unique parameter collection. Addresses are stable.
template <class T>
class ParameterStore {
 public:
  Parameter<T>& add(std::string name, Tensor<T> value, bool trainable = true) {
    if (index_.count(name)) throw DataError("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->grad = Tensor<T>(value.shape());
    p->value = std::move(value);
    p->trainable = trainable;
    index_.emplace(std::move(name), params_.size());
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<T>* find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<T>* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  Parameter<T>& at(std::string_view name) {
    auto* p = find(name);
    if (!p) throw DataError("unknown parameter: " + std::string(name));
    return *p;
  }
  const Parameter<T>& at(std::string_view name) const {
    auto* p = find(name);
    if (!p) throw DataError("unknown parameter: " + std::string(name));
    return *p;
  }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.cbegin(); }
  auto end() const { return params_.cend(); }

  void zero_grad() {
    for (auto& p : params_) p->grad.fill_value(T{0});
  }

  /// Number of trainable scalars whose name starts with `prefix`.
  std::size_t count_trainable(std::string_view prefix = {}) const {
    std::size_t n = 0;
    for (const auto& p : params_)
      if (p->trainable && std::string_view(p->name).substr(0, prefix.size()) == prefix)
        n += p->value.size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Handle to a node of a Graph.
struct Var {
  static constexpr std::uint32_t kInvalid = 0xFFFFFFFFu;
  std::uint32_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
};

/// Reverse-mode tape. Ops append nodes with their value computed eagerly, so
/// node ids are a topological order by construction. `backward` walks the tape
/// from the loss node down to id 0.
template <class T>
class Graph {
 public:
  struct Node;
  using BackwardFn = std::function<void(Graph&, const Node&)>;

  struct Node {
    std::string kind;
    std::vector<Var> inputs;
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
  };

  explicit Graph(Mode mode = Mode::train, std::uint64_t dropout_seed = 0)
      : mode_(mode), rng_(dropout_seed) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Mode mode() const { return mode_; }
  bool training() const { return mode_ == Mode::train; }
  Rng& rng() { return rng_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor<T> value, std::string kind = "constant") {
    return push(Node{std::move(kind), {}, std::move(value), {}, false, nullptr, {}});
  }

  /// A differentiable input (gradient checks differentiate w.r.t. these).
  Var leaf(Tensor<T> value) {
    return push(Node{"leaf", {}, std::move(value), {}, true, nullptr, {}});
  }

  Var param(Parameter<T>& p) {
    return push(Node{"param:" + p.name, {}, p.value, {}, p.trainable, &p, {}});
  }

  Var record(std::string kind, std::vector<Var> inputs, Tensor<T> value, BackwardFn backward) {
    bool rg = false;
    for (auto v : inputs) rg = rg || node(v).requires_grad;
    return push(Node{std::move(kind), std::move(inputs), std::move(value), {}, rg, nullptr,
                     rg ? std::move(backward) : BackwardFn{}});
  }

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw Error("graph: invalid node handle");
    return nodes_[v.id];
  }

  const Tensor<T>& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient buffer of `v`, zero-allocated on first touch.
  Tensor<T>& grad(Var v) {
    auto& n = nodes_.at(v.id);
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  const Tensor<T>* grad_if_any(Var v) const {
    const auto& n = node(v);
    return n.grad.empty() ? nullptr : &n.grad;
  }

  std::string describe(Var v) const {
    return node(v).kind + " (node " + std::to_string(v.id) + ")";
  }

  /// Accumulate d(loss)/d(param) into every trainable Parameter reached.
  void backward(Var loss) {
    if (nodes_.empty()) throw Error("backward called before forward: graph is empty");
    if (!loss.valid() || loss.id >= nodes_.size()) throw Error("backward: invalid loss node");
    if (node(loss).value.size() != 1)
      throw ShapeError("backward: loss node " + describe(loss) + " is not scalar");
    grad(loss).fill_value(T{1});
    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.grad.empty() || !n.requires_grad) continue;
      if (n.param) {
        auto& pg = n.param->grad.vec();
        const auto& g = n.grad.vec();
        for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
      }
      if (n.backward) n.backward(*this, n);
    }
  }

 private:
  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Mode mode_;
  Rng rng_;
  std::vector<Node> nodes_;
};

}  // namespace polsar::ad
