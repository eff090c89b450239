#pragma once

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>

#include "polsar/core/kv_config.hpp"
#include "polsar/data/patches.hpp"
#include "polsar/models/config.hpp"
#include "polsar/models/training.hpp"

namespace polsar::app {

inline constexpr int kSchemaVersion = 1;

/// Everything needed to reproduce a run. Serialized as flat key = value text
/// (see configs/ for annotated samples); unknown keys are rejected so typos
/// surface early.
struct RunConfig {
  std::filesystem::path raster;  // PTC1: S-matrix, T-matrix, or a preprocessed cube
  std::filesystem::path labels;  // PLBL1
  std::size_t window = 1;        // boxcar window when the raster holds S-matrix planes
  std::size_t per_class = 200;
  data::SplitOptions split{};
  models::ModelConfig model{};
  models::TrainConfig train{};
  std::uint64_t seed = 1;
  bool classes_given = false;

  static const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> k{
        "schema_version", "raster",        "labels",          "window",
        "per_class",      "cap_at_available", "test_includes_train", "variant",
        "classes",        "patch",         "widths",          "dense_layers",
        "growth_rate",    "growth_multiplier", "alpha",        "conv_drop",
        "conv_keep_prob", "fc_drop",       "fc_width",        "fusion_source",
        "epochs",         "batch_size",    "lr",              "beta1",
        "beta2",          "epsilon",       "eval_subsample",  "eval_batch",
        "threads",        "seed"};
    return k;
  }

  static RunConfig from_kv(const KeyValueConfig& kv, const std::filesystem::path& base = {}) {
    for (const auto& key : kv.keys())
      if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end())
        throw UsageError("unknown config key '" + key + "'");
    const auto version = kv.number<int>("schema_version", kSchemaVersion);
    if (version != kSchemaVersion)
      throw DataError("unsupported config schema_version " + std::to_string(version));

    RunConfig rc;
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_relative() && !base.empty() ? base / path : path;
    };
    if (kv.has("raster")) rc.raster = resolve(kv.str("raster"));
    if (kv.has("labels")) rc.labels = resolve(kv.str("labels"));
    rc.window = kv.number<std::size_t>("window", rc.window);
    rc.per_class = kv.number<std::size_t>("per_class", rc.per_class);
    rc.split.cap_at_available = kv.boolean("cap_at_available", false);
    rc.split.test_includes_train = kv.boolean("test_includes_train", false);
    rc.seed = kv.number<std::uint64_t>("seed", rc.seed);
    rc.classes_given = kv.has("classes");
    rc.model.read(kv);
    rc.train.epochs = kv.number<std::size_t>("epochs", rc.train.epochs);
    rc.train.batch_size = kv.number<std::size_t>("batch_size", rc.train.batch_size);
    rc.train.adam.lr = kv.number<double>("lr", rc.train.adam.lr);
    rc.train.adam.beta1 = kv.number<double>("beta1", rc.train.adam.beta1);
    rc.train.adam.beta2 = kv.number<double>("beta2", rc.train.adam.beta2);
    rc.train.adam.epsilon = kv.number<double>("epsilon", rc.train.adam.epsilon);
    rc.train.eval_subsample = kv.number<std::size_t>("eval_subsample", rc.train.eval_subsample);
    rc.train.eval_batch = kv.number<std::size_t>("eval_batch", rc.train.eval_batch);
    rc.train.threads = kv.number<std::size_t>("threads", rc.train.threads);
    rc.set_seed(rc.seed);
    return rc;
  }

  static RunConfig load(const std::filesystem::path& path) {
    return from_kv(KeyValueConfig::load(path), path.parent_path());
  }

  /// One seed drives initialization, the split, shuffling and dropout.
  void set_seed(std::uint64_t s) {
    seed = s;
    model.seed = s;
    train.seed = s;
  }

  KeyValueConfig to_kv() const {
    KeyValueConfig kv;
    auto num = [](double v) {
      std::ostringstream os;
      os.precision(17);
      os << v;
      return os.str();
    };
    kv.set("schema_version", std::to_string(kSchemaVersion));
    kv.set("raster", std::filesystem::absolute(raster).string());
    kv.set("labels", std::filesystem::absolute(labels).string());
    kv.set("window", std::to_string(window));
    kv.set("per_class", std::to_string(per_class));
    kv.set("cap_at_available", split.cap_at_available ? "true" : "false");
    kv.set("test_includes_train", split.test_includes_train ? "true" : "false");
    model.write(kv);
    kv.set("epochs", std::to_string(train.epochs));
    kv.set("batch_size", std::to_string(train.batch_size));
    kv.set("lr", num(train.adam.lr));
    kv.set("beta1", num(train.adam.beta1));
    kv.set("beta2", num(train.adam.beta2));
    kv.set("epsilon", num(train.adam.epsilon));
    kv.set("eval_subsample", std::to_string(train.eval_subsample));
    kv.set("eval_batch", std::to_string(train.eval_batch));
    kv.set("threads", std::to_string(train.threads));
    kv.set("seed", std::to_string(seed));
    return kv;
  }
};

}  // namespace polsar::app
