#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <thread>
#include <vector>

#include "polsar/autodiff/adam.hpp"
#include "polsar/data/patches.hpp"
#include "polsar/metrics/confusion.hpp"
#include "polsar/models/model.hpp"

namespace polsar::models {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  ad::AdamConfig adam{};
  std::uint64_t seed = 1;
  std::size_t eval_subsample = 0;  // test samples scored per epoch; 0 = all
  std::size_t eval_batch = 256;
  std::size_t threads = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;      // mean training loss over the epoch's batches
  double train_oa = 0.0;  // accuracy of the training-mode predictions seen during the epoch
  double test_oa = 0.0;   // NaN when no test set was given
};

/// Index of the largest entry; ties go to the lowest index.
template <class T>
std::size_t argmax_row(const T* p, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j)
    if (p[j] > p[best]) best = j;
  return best;
}

/// 1-based predicted class per row of an [N, c] probability tensor.
template <class T>
std::vector<std::uint16_t> predicted_classes(const Tensor<T>& probs) {
  const std::size_t n = probs.shape()[0], c = probs.shape()[1];
  std::vector<std::uint16_t> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = static_cast<std::uint16_t>(argmax_row(probs.data() + i * c, c) + 1);
  return out;
}

/// Inference-mode averaged probabilities for a batch of samples.
template <class T>
Tensor<T> predict_batch(const Model<T>& model, const data::PatchSet& set,
                        std::span<const std::size_t> indices) {
  Graph<T> g(ad::Mode::infer);
  const auto logits = model.forward(g, set.batch<T>(indices));
  return model.probabilities(g, logits);
}

/// Probabilities [set.size(), c] for every sample, computed in fixed-size
/// batches spread over `threads` workers. Each sample's result depends only on
/// its own patch, so the output is identical for any thread count.
template <class T>
std::vector<T> predict_all(const Model<T>& model, const data::PatchSet& set,
                           std::size_t batch = 256, std::size_t threads = 1) {
  const std::size_t c = model.classes();
  std::vector<T> out(set.size() * c);
  const std::size_t batches = (set.size() + batch - 1) / batch;
  auto work = [&](std::size_t first) {
    std::vector<std::size_t> idx;
    for (std::size_t b = first; b < batches; b += std::max<std::size_t>(threads, 1)) {
      idx.clear();
      for (std::size_t i = b * batch; i < std::min(set.size(), (b + 1) * batch); ++i)
        idx.push_back(i);
      const auto p = predict_batch(model, set, idx);
      std::copy(p.data(), p.data() + p.size(), out.data() + b * batch * c);
    }
  };
  if (threads <= 1 || batches <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, batches); ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  return out;
}

struct Evaluation {
  metrics::ConfusionMatrix confusion;
  std::vector<std::uint16_t> predictions;  // 1-based, per sample
};

template <class T>
Evaluation evaluate(const Model<T>& model, const data::PatchSet& set, std::size_t batch = 256,
                    std::size_t threads = 1) {
  if (set.empty()) throw DataError("evaluation set is empty");
  model.check_input(set.cube());
  const std::size_t c = model.classes();
  const auto probs = predict_all(model, set, batch, threads);
  Evaluation ev{metrics::ConfusionMatrix(c), {}};
  ev.predictions.resize(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    ev.predictions[i] = static_cast<std::uint16_t>(argmax_row(probs.data() + i * c, c) + 1);
    ev.confusion.accumulate(set[i].label, ev.predictions[i]);
  }
  return ev;
}

struct ClassMap {
  data::LabelMap labels;
  std::vector<float> probabilities;  // [H*W, c], row-major by pixel
};

/// Per-pixel classification of the whole cube with the same batched predict
/// path as evaluate().
template <class T>
ClassMap classify_map(const Model<T>& model, std::shared_ptr<const data::ChannelCube> cube,
                      std::vector<std::string> class_names = {}, std::size_t batch = 256,
                      std::size_t threads = 1) {
  model.check_input(*cube);
  const auto set = data::all_pixels(cube, model.config().patch, 1);
  const std::size_t c = model.classes();
  const auto probs = predict_all(model, set, batch, threads);
  if (class_names.size() != c) {
    class_names.clear();
    for (std::size_t i = 1; i <= c; ++i) class_names.push_back("class" + std::to_string(i));
  }
  ClassMap out{data::LabelMap(cube->height, cube->width, class_names), {}};
  out.probabilities.resize(probs.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    out.labels.at(set[i].row, set[i].col) =
        static_cast<std::uint16_t>(argmax_row(probs.data() + i * c, c) + 1);
    for (std::size_t j = 0; j < c; ++j)
      out.probabilities[(std::size_t{set[i].row} * cube->width + set[i].col) * c + j] =
          static_cast<float>(probs[i * c + j]);
  }
  return out;
}

/// Shuffled mini-batch Adam. Every random choice derives from cfg.seed, so
/// identical inputs give identical parameters and logs. A trailing batch of a
/// single sample is skipped (batch normalization needs two).
template <class T>
std::vector<EpochRecord> train(Model<T>& model, ad::Adam<T>& adam, const data::PatchSet& train_set,
                               const data::PatchSet* test_set, const TrainConfig& cfg,
                               std::ostream* log = nullptr) {
  if (train_set.size() < 2) throw DataError("training set needs at least 2 samples");
  if (cfg.batch_size < 2) throw DataError("batch size must be at least 2");
  model.check_input(train_set.cube());
  if (test_set) model.check_input(test_set->cube());

  data::PatchSet probe;
  if (test_set && !test_set->empty()) {
    if (cfg.eval_subsample == 0 || cfg.eval_subsample >= test_set->size()) {
      probe = *test_set;
    } else {
      std::vector<std::size_t> idx(test_set->size());
      std::iota(idx.begin(), idx.end(), 0);
      Rng pick(Rng::derive(cfg.seed, 0x5eedULL));
      pick.shuffle(std::span<std::size_t>(idx));
      idx.resize(cfg.eval_subsample);
      std::sort(idx.begin(), idx.end());
      probe = test_set->subset(idx, data::SplitTag::test);
    }
  }

  std::vector<EpochRecord> history;
  std::vector<std::size_t> order(train_set.size());
  std::vector<std::uint16_t> labels;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffler(Rng::derive(cfg.seed, epoch));
    shuffler.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t steps = 0, seen = 0, correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      if (end - start < 2) break;
      std::span<const std::size_t> idx(order.data() + start, end - start);
      labels.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train_set[idx[i]].label;

      Graph<T> g(ad::Mode::train, Rng::derive(cfg.seed, epoch, start));
      const auto logits = model.forward(g, train_set.batch<T>(idx));
      const Var loss = model.loss(g, logits, labels);
      const double lv = static_cast<double>(g.value(loss)[0]);
      if (!std::isfinite(lv))
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", batch starting at " + std::to_string(start));
      g.backward(loss);
      adam.step(model.parameters());

      const auto pred = predicted_classes(model.probabilities(g, logits));
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
      seen += pred.size();
      loss_sum += lv;
      ++steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
    rec.train_oa = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    rec.test_oa = std::nan("");
    if (!probe.empty()) {
      const auto ev = evaluate(model, probe, cfg.eval_batch, cfg.threads);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < probe.size(); ++i) hits += ev.predictions[i] == probe[i].label;
      rec.test_oa = static_cast<double>(hits) / static_cast<double>(probe.size());
    }
    history.push_back(rec);
    if (log) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      *log << "epoch " << std::setw(3) << epoch << "  loss " << std::fixed << std::setprecision(4)
           << rec.loss << "  train_oa " << rec.train_oa << "  test_oa " << rec.test_oa << "  ("
           << std::setprecision(1) << secs << " s)\n"
           << std::defaultfloat;
    }
  }
  return history;
}

}  // namespace polsar::models
