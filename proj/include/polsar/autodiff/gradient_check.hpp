#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "polsar/autodiff/graph.hpp"
#include "polsar/autodiff/ops.hpp"

namespace polsar::ad {

struct GradCheckEntry {
  std::string target;  // "input0", or a parameter name
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::string op;
  double tolerance = 1e-4;
  std::vector<GradCheckEntry> entries;

  double max_error() const {
    double e = 0.0;
    for (const auto& en : entries) e = std::max(e, en.max_rel_error);
    return e;
  }
  bool passed() const { return max_error() < tolerance; }
};

inline std::ostream& operator<<(std::ostream& os, const GradCheckReport& r) {
  os << (r.passed() ? "PASS " : "FAIL ") << r.op << "  max_rel_err=" << r.max_error()
     << " (tol " << r.tolerance << ")\n";
  for (const auto& e : r.entries)
    os << "    " << e.target << ": " << e.max_rel_error << " over " << e.checked << " elements\n";
  return os;
}

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  std::size_t samples = 5;  // random elements checked per input / parameter
  std::uint64_t seed = 1;
  Mode mode = Mode::train;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps elements whose true
/// gradient is exactly zero (inactive ReLU, non-selected pool inputs) from
/// dividing roundoff by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double den = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / den;
}

/// Compare analytic gradients of `build` against central finite differences.
///
/// `build(graph, inputs)` must record the op under test on the given input
/// vars and return its output. The scalar probed is sum(output * R) with a
/// fixed random R, so every output element contributes. Differentiable inputs
/// are filled uniformly in [-1, 1]; trainable parameters of `params` are
/// checked as well.
template <class Build>
GradCheckReport gradient_check(std::string op, const std::vector<Shape>& input_shapes,
                               ParameterStore<double>& params, Build&& build,
                               GradCheckOptions opt = {}) {
  Rng rng(opt.seed);
  std::vector<Tensor<double>> inputs;
  for (std::size_t i = 0; i < input_shapes.size(); ++i)
    inputs.push_back(Tensor<double>::create(
        input_shapes[i], fill::Uniform{-1.0, 1.0, Rng::derive(opt.seed, 100 + i)}));
  const std::uint64_t dropout_seed = Rng::derive(opt.seed, 7);

  Tensor<double> probe;
  auto evaluate = [&](bool with_backward, std::vector<Tensor<double>>* input_grads) {
    Graph<double> g(opt.mode, dropout_seed);
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.leaf(t));
    Var out = build(g, std::span<const Var>(vars));
    if (probe.empty())
      probe = Tensor<double>::create(g.value(out).shape(),
                                     fill::Gaussian{0.0, 1.0, Rng::derive(opt.seed, 9)});
    Var loss = sum(g, mul(g, out, g.constant(probe)));
    const double value = g.value(loss)[0];
    if (with_backward) {
      params.zero_grad();
      g.backward(loss);
      if (input_grads) {
        input_grads->clear();
        for (auto v : vars) {
          const auto* gr = g.grad_if_any(v);
          input_grads->push_back(gr ? *gr : Tensor<double>(g.value(v).shape()));
        }
      }
    }
    return value;
  };

  std::vector<Tensor<double>> input_grads;
  const double base = evaluate(true, &input_grads);
  // Central differences carry roundoff of about eps*|f|/h; a discrepancy at
  // that level is indistinguishable from zero, so it sets the denominator
  // floor (true gradients that vanish, e.g. a bias feeding batch norm, would
  // otherwise divide pure noise by 1e-6).
  const double noise = 4.0 * std::numeric_limits<double>::epsilon() *
                       std::max(1.0, std::abs(base)) / opt.step;
  const double floor = std::max(1e-6, noise / opt.tolerance);
  std::vector<Tensor<double>> param_grads;
  for (auto& p : params) param_grads.push_back(p->grad);

  auto probe_element = [&](double& slot) {
    const double saved = slot;
    slot = saved + opt.step;
    const double up = evaluate(false, nullptr);
    slot = saved - opt.step;
    const double down = evaluate(false, nullptr);
    slot = saved;
    return (up - down) / (2.0 * opt.step);
  };

  GradCheckReport report{std::move(op), opt.tolerance, {}};
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    GradCheckEntry e{"input" + std::to_string(i), 0.0, 0};
    const std::size_t n = std::min(opt.samples, inputs[i].size());
    for (std::size_t s = 0; s < n; ++s) {
      const auto idx = static_cast<std::size_t>(rng.below(inputs[i].size()));
      const double numeric = probe_element(inputs[i][idx]);
      e.max_rel_error = std::max(e.max_rel_error, relative_error(input_grads[i][idx], numeric, floor));
      ++e.checked;
    }
    report.entries.push_back(e);
  }
  std::size_t pi = 0;
  for (auto& p : params) {
    const auto& analytic = param_grads[pi++];
    if (!p->trainable) continue;
    GradCheckEntry e{p->name, 0.0, 0};
    const std::size_t n = std::min(opt.samples, p->value.size());
    for (std::size_t s = 0; s < n; ++s) {
      const auto idx = static_cast<std::size_t>(rng.below(p->value.size()));
      const double numeric = probe_element(p->value[idx]);
      e.max_rel_error = std::max(e.max_rel_error, relative_error(analytic[idx], numeric, floor));
      ++e.checked;
    }
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace polsar::ad
