// polsar_cli: preprocess, train, evaluate, classify-map, ablate, synth,
// gradient-check. Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.

#include <CLI11.hpp>

#include <malloc.h>

#include <iostream>

#include "polsar/app/commands.hpp"

int main(int argc, char** argv) {
  using namespace polsar;
  // Keep large activation buffers on the heap instead of a fresh mmap per op.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  CLI::App app{"PolSAR amplitude/phase CNN classification"};
  app.require_subcommand(1);
  app.fallthrough();

  app::Globals g;
  std::string config, out = ".";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  app.add_option("--config", config, "run or synth config (key = value)");
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out, "output directory");
  auto* threads_opt =
      app.add_option("--threads", threads, "worker threads for batched inference")
          ->check(CLI::PositiveNumber);

  auto* pre = app.add_subcommand("preprocess", "PTC1 raster -> channel cube");
  app::PreprocessArgs pre_args;
  std::string form = "amp_phase";
  pre->add_option("--in", pre_args.input, "input PTC1 raster")->required();
  pre->add_option("--form", form, "amp_phase or real_imag");
  pre->add_option("--window", pre_args.window, "boxcar window for S-matrix input (odd)");

  auto* train = app.add_subcommand("train", "train a model");

  auto* eval = app.add_subcommand("evaluate", "score a checkpoint");
  app::EvaluateArgs eval_args;
  eval->add_option("--checkpoint", eval_args.checkpoint, "model.pckpt")->required();
  eval->add_flag("--all-labeled", eval_args.all_labeled, "score every labeled pixel");

  auto* cmap = app.add_subcommand("classify-map", "classify every pixel and render a map");
  app::ClassifyArgs cmap_args;
  std::string raster, overlay;
  cmap->add_option("--checkpoint", cmap_args.checkpoint, "model.pckpt")->required();
  cmap->add_option("--raster", raster, "PTC1 raster (default: the run's raster)");
  cmap->add_option("--overlay", overlay, "ground-truth PLBL1; unlabeled pixels drawn black");

  auto* ablate = app.add_subcommand("ablate", "train and compare M1..M6");
  auto* synth = app.add_subcommand("synth", "generate a synthetic PolSAR scene");

  auto* grad = app.add_subcommand("gradient-check", "finite-difference checks of every layer op");
  double tolerance = 1e-4;
  grad->add_option("--tolerance", tolerance, "maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (!config.empty()) g.config = config;
  if (*seed_opt) g.seed = seed;
  if (*threads_opt) g.threads = threads;
  g.out = out;

  try {
    if (*pre) {
      pre_args.form = data::parse_form(form);
      return app::cmd_preprocess(g, pre_args);
    }
    if (*train) return app::cmd_train(g);
    if (*eval) return app::cmd_evaluate(g, eval_args);
    if (*cmap) {
      if (!raster.empty()) cmap_args.raster = raster;
      if (!overlay.empty()) cmap_args.overlay = overlay;
      return app::cmd_classify_map(g, cmap_args);
    }
    if (*ablate) return app::cmd_ablate(g);
    if (*synth) return app::cmd_synth(g);
    if (*grad) return app::cmd_gradient_check(g, tolerance);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
