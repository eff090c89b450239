// Acceptance run: one PASS/FAIL/SKIPPED line per criterion. Exit status is
// nonzero when any criterion fails.

#include <malloc.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "polsar/app/commands.hpp"

namespace fs = std::filesystem;
using namespace polsar;
using ad::Graph;
using ad::Var;

namespace {

enum class Status { pass, fail, skipped };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::string read_all(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const fs::path& scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("polsar_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// ---- independent oracles ----

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(double(a[i]) - double(b[i])));
  return d;
}

// SAME 3x3 cross-correlation accumulated in double, one output at a time.
std::vector<float> conv_oracle(const Tensor<float>& x, const Tensor<float>& w, const Tensor<float>& bias) {
  const std::size_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
  const std::size_t k = w.shape()[0];
  std::vector<float> y(n * k * h * wd);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < k; ++o)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < wd; ++j) {
          double s = bias[o];
          for (std::size_t ch = 0; ch < c; ++ch)
            for (long u = -1; u <= 1; ++u)
              for (long v = -1; v <= 1; ++v) {
                const long yy = long(i) + u, xx = long(j) + v;
                if (yy < 0 || xx < 0 || yy >= long(h) || xx >= long(wd)) continue;
                s += double(x.at(b, ch, yy, xx)) * w[((o * c + ch) * 3 + (u + 1)) * 3 + (v + 1)];
              }
          y[((b * k + o) * h + i) * wd + j] = float(s);
        }
  return y;
}

// Per-channel 3x3 filter then 1x1 mixing, both in double.
std::vector<float> separable_oracle(const Tensor<float>& x, const Tensor<float>& dw,
                                    const Tensor<float>& pw, const Tensor<float>& bias) {
  const std::size_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
  const std::size_t k = pw.shape()[0];
  std::vector<double> mid(n * c * h * wd);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < wd; ++j) {
          double s = 0;
          for (long u = -1; u <= 1; ++u)
            for (long v = -1; v <= 1; ++v) {
              const long yy = long(i) + u, xx = long(j) + v;
              if (yy < 0 || xx < 0 || yy >= long(h) || xx >= long(wd)) continue;
              s += double(x.at(b, ch, yy, xx)) * dw[ch * 9 + (u + 1) * 3 + (v + 1)];
            }
          mid[((b * c + ch) * h + i) * wd + j] = s;
        }
  std::vector<float> y(n * k * h * wd);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < k; ++o)
      for (std::size_t p = 0; p < h * wd; ++p) {
        double s = bias[o];
        for (std::size_t ch = 0; ch < c; ++ch) s += double(pw[o * c + ch]) * mid[(b * c + ch) * h * wd + p];
        y[(b * k + o) * h * wd + p] = float(s);
      }
  return y;
}

// Accuracy, chance-corrected agreement and squared mean F1 from a dense table.
struct MetricRef {
  double aa, oa, kappa, f1;
};

MetricRef metric_oracle(std::size_t c, const std::vector<std::uint64_t>& h) {
  std::vector<double> row(c, 0), col(c, 0);
  double n = 0, diag = 0;
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double v = double(h[i * c + j]);
      row[i] += v;
      col[j] += v;
      n += v;
    }
  double aa = 0, pe = 0, f = 0;
  for (std::size_t i = 0; i < c; ++i) {
    const double tp = double(h[i * c + i]);
    diag += tp;
    aa += tp / row[i];
    pe += row[i] * col[i] / (n * n);
    const double prec = col[i] > 0 ? tp / col[i] : 0.0, rec = tp / row[i];
    f += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  }
  const double oa = diag / n;
  f /= double(c);
  return {aa / double(c), oa, (oa - pe) / (1 - pe), f * f};
}

// Cross-entropy of one head from its logits, log-sum-exp in long double.
double cross_entropy_oracle(const Tensor<double>& logits, const std::vector<std::uint16_t>& y) {
  const std::size_t n = logits.shape()[0], c = logits.shape()[1];
  long double total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    long double mx = logits[r * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max<long double>(mx, logits[r * c + j]);
    long double z = 0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp((long double)logits[r * c + j] - mx);
    total += mx + std::log(z) - logits[r * c + y[r] - 1];
  }
  return double(total / n);
}

data::SynthScene default_scene() { return data::generate_scene(data::SynthSpec::three_class_default()); }

// ---- criteria ----

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto reports = nn::run_gradient_suite(1, 1e-4);
  const double secs = seconds_since(t0);
  std::map<std::string, int> shapes;
  double worst = 0;
  std::string failed;
  for (const auto& r : reports) {
    shapes[r.op.substr(0, r.op.find(' '))] += 1;
    worst = std::max(worst, r.max_error());
    if (!r.passed()) failed += " " + r.op;
  }
  bool enough = true;
  for (const char* op : {"conv2d", "depthwise_separable", "max_pool", "batch_norm(train)",
                         "dropout(eval)", "fully_connected", "softmax_cross_entropy",
                         "dense_block", "weighted_sum"}) {
    if (shapes[op] < 3) {
      enough = false;
      failed += std::string(" ") + op + "(<3 shapes)";
    }
  }
  return verdict(failed.empty() && enough && secs < 60.0,
                 std::to_string(reports.size()) + " checks over " + std::to_string(shapes.size()) +
                     " ops, worst rel err " + fmt(worst, 3) + ", " + fmt(secs, 3) + " s" +
                     (failed.empty() ? "" : "; failing:" + failed));
}

Outcome convolution_oracles() {
  double worst_conv = 0, worst_sep = 0;
  bool counts_ok = true;
  std::uint64_t seed = 100;
  Rng rng(9);
  for (std::size_t c : {1, 3, 6, 9})
    for (std::size_t k : {1, 12, 32, 64}) {
      const std::size_t n = 1 + rng.below(3), h = 3 + rng.below(14), w = 3 + rng.below(14);
      auto x = Tensor<float>::create(Shape{n, c, h, w}, fill::Uniform{-1, 1, ++seed});
      auto wt = Tensor<float>::create(Shape{k, c, 3, 3}, fill::Uniform{-1, 1, ++seed});
      auto b = Tensor<float>::create(Shape{k}, fill::Uniform{-1, 1, ++seed});
      Graph<float> g;
      worst_conv = std::max(worst_conv, max_abs_diff(g.value(ad::conv2d(g, g.constant(x), g.constant(wt),
                                                                          g.constant(b))).span(),
                                                     conv_oracle(x, wt, b)));

      ad::ParameterStore<float> ps;
      nn::Builder<float> builder(ps, ++seed);
      nn::DepthwiseSeparableConvLayer<float> sep(builder, "sep", c, k);
      sep.bias().value = b;
      worst_sep = std::max(worst_sep, max_abs_diff(g.value(sep.forward(g, g.constant(x))).span(),
                                                   separable_oracle(x, sep.depthwise().value,
                                                                    sep.pointwise().value, b)));
      nn::Conv2DLayer<float> vanilla(builder, "conv", c, k);
      counts_ok &= sep.weight_count() == 9 * c + c * k;
      counts_ok &= vanilla.parameter_count() - k == 9 * c * k;
    }
  ad::ParameterStore<float> ps;
  nn::Builder<float> builder(ps, 1);
  nn::DepthwiseSeparableConvLayer<float> sep(builder, "sep", 9, 32);
  nn::Conv2DLayer<float> vanilla(builder, "conv", 9, 32);
  const std::size_t sep_w = sep.weight_count(), van_w = vanilla.parameter_count() - 32;
  counts_ok &= sep_w == 369 && van_w == 2592;
  return verdict(worst_conv < 1e-5 && worst_sep < 1e-5 && counts_ok,
                 "conv max diff " + fmt(worst_conv, 3) + ", separable max diff " + fmt(worst_sep, 3) +
                     ", c=9 K=32 weights " + std::to_string(sep_w) + " vs " + std::to_string(van_w) +
                     (counts_ok ? "" : " (count formula mismatch)"));
}

Outcome transform_suite() {
  // Random Pauli field averaged over a 3x3 window gives genuine coherency data.
  data::ScatteringImage s(48, 40);
  Rng rng(77);
  for (std::size_t i = 0; i < s.hh.size(); ++i) {
    s.hh[i] = {rng.gaussian(), rng.gaussian()};
    s.hv[i] = {0.5 * rng.gaussian(), 0.5 * rng.gaussian()};
    s.vv[i] = {rng.gaussian(), rng.gaussian()};
  }
  const auto t = data::coherency_matrix(data::pauli_vector(s), 3);
  const auto ap = data::to_amplitude_phase(t);
  const auto ri = data::to_real_imag(t);
  const std::size_t px = t.pixels();
  double worst = 0;
  for (std::size_t i = 0; i < px; ++i) {
    for (std::size_t d = 0; d < 3; ++d)
      worst = std::max(worst, std::abs(double(ap.data[d * px + i]) - ri.data[d * px + i]));
    for (std::size_t j = 0; j < 3; ++j) {
      const double r = ap.data[(3 + j) * px + i], phi = ap.data[(6 + j) * px + i];
      worst = std::max(worst, std::abs(r * std::cos(phi) - ri.data[(3 + 2 * j) * px + i]));
      worst = std::max(worst, std::abs(r * std::sin(phi) - ri.data[(4 + 2 * j) * px + i]));
    }
  }
  const double pi = std::acos(-1.0);
  const bool axes = data::phase_angle(0.0, 2.5) == pi / 2 && data::phase_angle(-3.0, 0.0) == pi &&
                    data::phase_angle(-3.0, -0.0) == pi && data::phase_angle(4.0, 0.0) == 0.0 &&
                    data::phase_angle(0.0, -1.0) == -pi / 2;
  return verdict(worst < 1e-6 && axes, "round trip max diff " + fmt(worst, 3) + " over " +
                                           std::to_string(px) + " px, axis cases " +
                                           (axes ? "exact" : "WRONG"));
}

Outcome metric_oracle_check() {
  Rng rng(2024);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = 2 + rng.below(14);
    std::vector<std::uint64_t> h(c * c);
    for (auto& v : h) v = rng.below(100);
    for (std::size_t i = 0; i < c; ++i) h[i * c + i] += 1 + rng.below(300);
    const auto cm = metrics::ConfusionMatrix::from_counts(c, h);
    const auto ref = metric_oracle(c, h);
    const auto acc = metrics::aa_oa(cm);
    for (double d : {acc.aa - ref.aa, acc.oa - ref.oa, metrics::kappa(cm) - ref.kappa,
                     metrics::f1(cm, nullptr) - ref.f1})
      worst = std::max(worst, std::abs(d));
  }
  const auto ex = metrics::ConfusionMatrix::from_counts(2, {3, 1, 2, 4});
  const double oa = metrics::aa_oa(ex).oa, k = metrics::kappa(ex);
  const bool worked = std::abs(oa - 0.70) < 1e-15 && std::abs(k - 0.40) < 1e-15;
  return verdict(worst < 1e-12 && worked, "1000 tables, max diff " + fmt(worst, 3) +
                                              "; worked example OA " + fmt(oa, 17) + " Kappa " +
                                              fmt(k, 17));
}

Outcome architecture_invariants() {
  std::string problems;
  auto spec = data::SynthSpec::three_class_default(64, 3);
  const auto scene = data::generate_scene(spec);
  auto cube = std::make_shared<data::ChannelCube>(data::to_amplitude_phase(
      data::coherency_matrix(data::pauli_vector(scene.scattering), 3)));
  const auto patches = data::extract_patches(cube, scene.labels, 14);
  std::vector<std::size_t> idx;
  std::vector<std::uint16_t> y;
  for (std::size_t i = 0; i < 12; ++i) {
    idx.push_back(i * 311 % patches.size());
    y.push_back(patches[idx.back()].label);
  }

  models::ModelConfig cfg;  // full widths, alpha = 1
  cfg.alpha = {0.7, 1.3, 0.4};
  models::Model<double> mcnn(cfg);
  if (mcnn.heads().size() != 4) problems += " heads=" + std::to_string(mcnn.heads().size());
  Graph<double> g(ad::Mode::train, 42);
  const auto logits = mcnn.forward(g, patches.batch<double>(idx));
  const double total = g.value(mcnn.loss(g, logits, y))[0];
  double separate = 0;
  for (std::size_t h = 0; h < logits.size(); ++h)
    separate += mcnn.heads()[h].loss_weight * cross_entropy_oracle(g.value(logits[h]), y);
  const double loss_diff = std::abs(total - separate);
  if (loss_diff >= 1e-10) problems += " loss diff " + fmt(loss_diff, 3);

  for (auto dc : {nn::DenseBlockConfig{5, 16, 4}, nn::DenseBlockConfig{5, 12, 2}}) {
    const std::size_t in = dc.growth == 16 ? 128 : 48;
    const std::size_t expect = in + dc.first_multiplier * dc.growth + (dc.layers - 1) * dc.growth;
    ad::ParameterStore<float> ps;
    nn::Builder<float> b(ps, 1);
    nn::DenseBlock<float> block(b, "dense", in, dc, 0.0);
    Graph<float> gf(ad::Mode::infer);
    const auto& out = gf.value(block.forward(gf, gf.constant(Tensor<float>(Shape{1, in, 3, 3}))));
    if (out.shape()[1] != expect || block.out_channels() != expect)
      problems += " dense(" + std::to_string(dc.growth) + ") channels " + std::to_string(out.shape()[1]);
  }

  auto layout = [](models::Variant v) {
    models::ModelConfig c;
    c.variant = v;
    models::Model<float> m(c);
    std::map<std::string, Shape> out;
    for (const auto& p : m.parameters()) out.emplace(p->name, p->value.shape());
    return out;
  };
  if (layout(models::Variant::M5) != layout(models::Variant::MCNN)) problems += " M5!=MCNN";
  if (layout(models::Variant::M6) != layout(models::Variant::DMCNN)) problems += " M6!=DMCNN";
  return verdict(problems.empty(), "4 heads, weighted loss vs per-head oracle diff " +
                                       fmt(loss_diff, 3) + ", dense widths 256/120" +
                                       (problems.empty() ? "" : "; problems:" + problems));
}

Outcome end_to_end() {
  const auto dir = scratch() / "synth";
  fs::create_directories(dir);
  const auto scene = default_scene();
  data::save_ptc1(dir / "scene.ptc1", data::raster_from_scattering(scene.scattering));
  data::save_plbl1(dir / "labels.plbl1", scene.labels);

  std::string detail;
  bool ok = true;
  std::map<std::string, std::size_t> phase_params;
  for (const char* name : {"synthetic_mcnn.cfg", "synthetic_dmcnn.cfg"}) {
    auto rc = app::RunConfig::load(fs::path(POLSAR_CONFIG_DIR) / name);
    rc.raster = dir / "scene.ptc1";
    rc.labels = dir / "labels.plbl1";
    const auto t0 = std::chrono::steady_clock::now();
    const auto ds = app::load_dataset(rc, &std::cerr);
    const auto trained = app::train_model(rc, ds, &std::cerr);
    const auto ev = models::evaluate(*trained.model, ds.split.test, rc.train.eval_batch, 1);
    const double secs = seconds_since(t0);
    const double oa = metrics::aa_oa(ev.confusion).oa;
    const auto variant = models::to_string(rc.model.variant);
    phase_params[variant] = trained.model->parameter_count("phase_branch/");
    ok &= oa >= 0.95 && secs < 300.0 && rc.train.epochs <= 50;
    detail += variant + " OA " + fmt(100 * oa, 4) + "% in " + std::to_string(rc.train.epochs) +
              " epochs, " + fmt(secs, 3) + " s; ";
  }
  const bool smaller = phase_params["DMCNN"] < phase_params["MCNN"];
  ok &= smaller;
  detail += "phase branch params " + std::to_string(phase_params["DMCNN"]) + " vs " +
            std::to_string(phase_params["MCNN"]);
  return verdict(ok, detail);
}

Outcome determinism() {
  const auto dir = scratch() / "determinism";
  fs::create_directories(dir);
  const auto scene = default_scene();
  data::save_ptc1(dir / "scene.ptc1", data::raster_from_scattering(scene.scattering));
  data::save_plbl1(dir / "labels.plbl1", scene.labels);
  auto rc = app::RunConfig::load(fs::path(POLSAR_CONFIG_DIR) / "synthetic_mcnn.cfg");
  rc.raster = dir / "scene.ptc1";
  rc.labels = dir / "labels.plbl1";
  rc.train.epochs = 3;
  {
    std::ofstream os(dir / "run.cfg");
    os << rc.to_kv().to_text();
  }
  for (const char* run : {"a", "b"}) {
    app::Globals g;
    g.config = dir / "run.cfg";
    g.out = dir / run;
    g.log = nullptr;
    if (app::cmd_train(g) != 0) return {Status::fail, std::string("cmd_train failed for run ") + run};
  }
  std::string detail;
  bool ok = true;
  for (const char* f : {"model.pckpt", "epochs.csv"}) {
    const auto a = read_all(dir / "a" / f), b = read_all(dir / "b" / f);
    const bool same = !a.empty() && a == b;
    ok &= same;
    detail += std::string(f) + " " + std::to_string(a.size()) + " bytes " +
              (same ? "identical" : "DIFFER") + "; ";
  }
  return verdict(ok, detail + "3 epochs of the MCNN config");
}

Outcome benchmarks() {
  const char* env = std::getenv("POLSAR_BENCHMARK_DIR");
  if (!env || !*env)
    return {Status::skipped, "set POLSAR_BENCHMARK_DIR to a directory with flevoland.cfg, "
                             "oberpfaffenhofen.cfg and/or foulum.cfg"};
  const fs::path dir(env);
  const std::vector<std::pair<std::string, double>> targets{
      {"flevoland", 0.9877}, {"oberpfaffenhofen", 0.9806}, {"foulum", 0.9983}};
  std::string detail;
  bool ok = true, any = false;
  for (const auto& [name, target] : targets) {
    const auto path = dir / (name + ".cfg");
    if (!fs::exists(path)) continue;
    any = true;
    auto rc = app::RunConfig::load(path);
    rc.model.variant = models::Variant::DMCNN;
    const auto ds = app::load_dataset(rc, &std::cerr);
    const auto trained = app::train_model(rc, ds, &std::cerr);
    const auto ev = models::evaluate(*trained.model, ds.split.test, rc.train.eval_batch,
                                     rc.train.threads);
    const double oa = metrics::aa_oa(ev.confusion).oa;
    const bool hit = std::abs(oa - target) <= 0.02;
    ok &= hit;
    detail += name + " OA " + fmt(100 * oa, 4) + "% (target " + fmt(100 * target, 4) + "%" +
              (hit ? "" : ", outside 2 pp") + "); ";
    if (name == "foulum") {
      // Ablation trend is reported, not gated.
      const auto rows = app::run_ablation(rc, &std::cerr);
      detail += "ablation OA:";
      bool monotone = true;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        detail += " " + rows[i].variant + "=" + fmt(100 * rows[i].report.oa, 4);
        if (i > 0 && rows[i].report.oa < rows[i - 1].report.oa) monotone = false;
      }
      detail += monotone ? " (non-decreasing); " : " (not monotone); ";
    }
  }
  if (!any) return {Status::skipped, "no benchmark configs found in " + dir.string()};
  return verdict(ok, detail);
}

}  // namespace

int main() {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"convolution oracles", convolution_oracles},
      {"transform suite", transform_suite},
      {"metric oracle", metric_oracle_check},
      {"architecture invariants", architecture_invariants},
      {"end-to-end synthetic scene", end_to_end},
      {"determinism", determinism},
      {"benchmark datasets", benchmarks}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIPPED";
    failures += o.status == Status::fail;
    std::cout << tag << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail << std::endl;
  }
  fs::remove_all(scratch());
  return failures == 0 ? 0 : 1;
}
