#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "polsar/app/pipeline.hpp"
#include "polsar/app/png.hpp"
#include "polsar/app/run_config.hpp"
#include "polsar/data/synth.hpp"
#include "polsar/metrics/confusion.hpp"
#include "polsar/nn/gradient_suite.hpp"

namespace polsar::app {

namespace fs = std::filesystem;

/// Flags shared by every command.
struct Globals {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  fs::path out = ".";
  std::optional<std::size_t> threads;
  std::ostream* log = &std::cerr;
};

inline void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw DataError("no such file: " + path.string());
}

inline RunConfig resolve_config(const Globals& g, const std::optional<fs::path>& fallback = {}) {
  RunConfig rc;
  if (g.config)
    rc = RunConfig::load(*g.config);
  else if (fallback && fs::exists(*fallback))
    rc = RunConfig::load(*fallback);
  else
    throw UsageError("this command needs --config");
  if (g.seed) rc.set_seed(*g.seed);
  if (g.threads) rc.train.threads = *g.threads;
  return rc;
}

inline void ensure_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

// ---- preprocess ----

struct PreprocessArgs {
  fs::path input;
  data::ChannelForm form = data::ChannelForm::amp_phase;
  std::size_t window = 1;
};

/// Writes `cube.ptc1` (unnormalized, in the requested form) and
/// `cube_stats.txt` (whole-image channel mean and std).
inline int cmd_preprocess(const Globals& g, const PreprocessArgs& a) {
  const auto cube = load_cube(a.input, a.form, a.window);
  const auto stats = data::compute_channel_stats(*cube);
  ensure_out(g.out);
  data::save_ptc1(g.out / "cube.ptc1", data::raster_from_cube(*cube));
  write_text_atomic(g.out / "cube_stats.txt", data::format_stats(*cube, stats));
  if (g.log)
    *g.log << "wrote " << (g.out / "cube.ptc1").string() << " (" << data::to_string(cube->form)
           << ", " << cube->height << "x" << cube->width << ")\n";
  return 0;
}

// ---- train ----

inline std::string format_report_with_header(const std::string& title, const metrics::Report& r) {
  return title + "\n" + metrics::format_report(r);
}

/// Writes run.cfg, model.pckpt, epochs.csv, report.txt and metrics.kv. The
/// report covers the full test split.
inline int cmd_train(const Globals& g) {
  auto rc = resolve_config(g);
  auto ds = load_dataset(rc, g.log);
  ensure_out(g.out);
  write_text_atomic(g.out / "run.cfg", rc.to_kv().to_text());
  auto trained = train_model(rc, ds, g.log);
  ad::save_checkpoint(g.out / "model.pckpt", trained.model->parameters(), trained.adam.get());
  write_text_atomic(g.out / "epochs.csv", format_epoch_csv(trained.history));
  if (!ds.split.test.empty()) {
    const auto ev =
        models::evaluate(*trained.model, ds.split.test, rc.train.eval_batch, rc.train.threads);
    const auto report = metrics::make_report(ev.confusion, ds.labels.class_names);
    write_text_atomic(g.out / "report.txt",
                      format_report_with_header(models::to_string(rc.model.variant), report));
    write_text_atomic(g.out / "metrics.kv", metrics::format_report_kv(report));
    if (g.log) *g.log << metrics::format_report(report);
  }
  return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
  fs::path checkpoint;
  bool all_labeled = false;  // score every labeled pixel instead of the held-out split
};

inline int cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  require_file(a.checkpoint);
  auto rc = resolve_config(g, a.checkpoint.parent_path() / "run.cfg");
  auto ds = load_dataset(rc, g.log);
  const auto model = load_model(rc, a.checkpoint);
  const auto& set = a.all_labeled ? ds.labeled : ds.split.test;
  const auto ev = models::evaluate(*model, set, rc.train.eval_batch, rc.train.threads);
  const auto report = metrics::make_report(ev.confusion, ds.labels.class_names);
  ensure_out(g.out);
  const auto text = format_report_with_header(models::to_string(rc.model.variant), report);
  write_text_atomic(g.out / "report.txt", text);
  write_text_atomic(g.out / "metrics.kv", metrics::format_report_kv(report));
  std::cout << text;
  return 0;
}

// ---- classify-map ----

struct ClassifyArgs {
  fs::path checkpoint;
  std::optional<fs::path> raster;   // defaults to the run's raster
  std::optional<fs::path> overlay;  // ground truth whose unlabeled pixels are blacked out
};

/// Writes classmap.plbl1 and classmap.png (plus classmap_overlay.png).
inline int cmd_classify_map(const Globals& g, const ClassifyArgs& a) {
  require_file(a.checkpoint);
  auto rc = resolve_config(g, a.checkpoint.parent_path() / "run.cfg");
  const auto model = load_model(rc, a.checkpoint);
  const auto cube = load_cube(a.raster ? *a.raster : rc.raster, model->required_form(), rc.window);
  std::vector<std::string> names;
  if (!rc.labels.empty() && fs::exists(rc.labels)) names = data::load_plbl1(rc.labels).class_names;
  const auto map =
      models::classify_map(*model, cube, names, rc.train.eval_batch, rc.train.threads);
  ensure_out(g.out);
  data::save_plbl1(g.out / "classmap.plbl1", map.labels);
  const ClassPalette palette(model->classes());
  save_png(g.out / "classmap.png", map.labels.width, map.labels.height,
           render(map.labels, palette));
  if (a.overlay) {
    const auto truth = data::load_plbl1(*a.overlay);
    save_png(g.out / "classmap_overlay.png", map.labels.width, map.labels.height,
             render(map.labels, palette, &truth));
  }
  if (g.log) *g.log << "classified " << map.labels.height << "x" << map.labels.width << " pixels\n";
  return 0;
}

// ---- ablate ----

struct AblationRow {
  std::string variant;
  metrics::Report report;
};

inline std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "model" << std::right << std::setw(10) << "AA"
     << std::setw(10) << "OA" << std::setw(10) << "Kappa" << std::setw(10) << "F1"
     << std::setw(12) << "F1_macro" << '\n'
     << std::fixed;
  for (const auto& r : rows)
    os << std::left << std::setw(8) << r.variant << std::right << std::setprecision(2)
       << std::setw(10) << 100.0 * r.report.aa << std::setw(10) << 100.0 * r.report.oa
       << std::setprecision(4) << std::setw(10) << r.report.kappa << std::setw(10) << r.report.f1
       << std::setw(12) << r.report.f1_macro << '\n';
  return os.str();
}

/// Trains M1..M6 on the same split and seed; writes ablation.txt and
/// ablation.kv.
inline std::vector<AblationRow> run_ablation(RunConfig rc, std::ostream* log) {
  auto ds = load_dataset(rc, log);
  std::vector<AblationRow> rows;
  for (auto v : {models::Variant::M1, models::Variant::M2, models::Variant::M3,
                 models::Variant::M4, models::Variant::M5, models::Variant::M6}) {
    rc.model.variant = v;
    auto trained = train_model(rc, ds, log);
    const auto ev =
        models::evaluate(*trained.model, ds.split.test, rc.train.eval_batch, rc.train.threads);
    rows.push_back({models::to_string(v), metrics::make_report(ev.confusion, ds.labels.class_names)});
  }
  return rows;
}

inline int cmd_ablate(const Globals& g) {
  auto rc = resolve_config(g);
  const auto rows = run_ablation(rc, g.log);
  ensure_out(g.out);
  const auto table = format_ablation(rows);
  write_text_atomic(g.out / "ablation.txt", table);
  std::ostringstream kv;
  kv << std::setprecision(17);
  for (const auto& r : rows)
    kv << r.variant << ".AA = " << r.report.aa << '\n'
       << r.variant << ".OA = " << r.report.oa << '\n'
       << r.variant << ".Kappa = " << r.report.kappa << '\n'
       << r.variant << ".F1 = " << r.report.f1 << '\n'
       << r.variant << ".F1_macro = " << r.report.f1_macro << '\n';
  write_text_atomic(g.out / "ablation.kv", kv.str());
  std::cout << table;
  return 0;
}

// ---- synth ----

/// Writes scene.ptc1 (S-matrix planes) and labels.plbl1. Without a config
/// the three-class 128x128 default scene is generated.
inline int cmd_synth(const Globals& g) {
  auto spec = g.config ? data::SynthSpec::from_config(KeyValueConfig::load(*g.config))
                       : data::SynthSpec::three_class_default();
  if (g.seed) spec.seed = *g.seed;
  const auto scene = data::generate_scene(spec);
  ensure_out(g.out);
  data::save_ptc1(g.out / "scene.ptc1", data::raster_from_scattering(scene.scattering));
  data::save_plbl1(g.out / "labels.plbl1", scene.labels);
  if (g.log)
    *g.log << "wrote " << spec.height << "x" << spec.width << " scene with "
           << spec.classes.size() << " classes to " << g.out.string() << '\n';
  return 0;
}

// ---- gradient-check ----

/// Exit 3 when any op exceeds the tolerance.
inline int cmd_gradient_check(const Globals& g, double tolerance) {
  const auto reports = nn::run_gradient_suite(g.seed.value_or(1), tolerance, &std::cout);
  std::size_t failed = 0;
  for (const auto& r : reports) failed += !r.passed();
  std::cout << reports.size() - failed << "/" << reports.size() << " gradient checks passed\n";
  return failed ? 3 : 0;
}

}  // namespace polsar::app
