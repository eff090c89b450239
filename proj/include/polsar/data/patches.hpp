#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "polsar/core/rng.hpp"
#include "polsar/core/tensor.hpp"
#include "polsar/data/polsar_image.hpp"

namespace polsar::data {

enum class SplitTag { train, test, all_labeled };

/// Patches centered on pixels of a shared cube, materialized on demand.
///
/// A patch of size s covers rows [r - s/2, r - s/2 + s) around center row r
/// (same for columns); out-of-bounds reads replicate the nearest edge pixel.
class PatchSet {
 public:
  struct Sample {
    std::uint32_t row = 0, col = 0;
    std::uint16_t label = 0;  // 1..c, or 0 for unlabeled sweeps
  };

  PatchSet() = default;
  PatchSet(std::shared_ptr<const ChannelCube> cube, std::size_t patch_size, SplitTag tag)
      : cube_(std::move(cube)), size_(patch_size), tag_(tag) {}

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t patch_size() const { return size_; }
  std::size_t channels() const { return cube_ ? cube_->channels : 0; }
  SplitTag tag() const { return tag_; }
  const ChannelCube& cube() const { return *cube_; }
  const std::shared_ptr<const ChannelCube>& cube_ptr() const { return cube_; }
  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  void push_back(Sample s) { samples_.push_back(s); }

  PatchSet subset(std::span<const std::size_t> indices, SplitTag tag) const {
    PatchSet out(cube_, size_, tag);
    out.samples_.reserve(indices.size());
    for (auto i : indices) out.samples_.push_back(samples_.at(i));
    return out;
  }

  /// Write the patch of sample i into dst[C, s, s].
  template <class T>
  void write_patch(std::size_t i, T* dst) const {
    const auto& s = samples_[i];
    const long h = static_cast<long>(cube_->height), w = static_cast<long>(cube_->width);
    const long half = static_cast<long>(size_ / 2);
    for (std::size_t c = 0; c < cube_->channels; ++c) {
      const float* plane = cube_->data.data() + c * cube_->pixels();
      for (std::size_t py = 0; py < size_; ++py) {
        const long sy = std::clamp(static_cast<long>(s.row) - half + static_cast<long>(py), 0L, h - 1);
        for (std::size_t px = 0; px < size_; ++px) {
          const long sx =
              std::clamp(static_cast<long>(s.col) - half + static_cast<long>(px), 0L, w - 1);
          *dst++ = static_cast<T>(plane[sy * w + sx]);
        }
      }
    }
  }

  template <class T>
  Tensor<T> patch(std::size_t i) const {
    Tensor<T> t(Shape{channels(), size_, size_});
    write_patch(i, t.data());
    return t;
  }

  /// Stack the given samples into [N, C, s, s].
  template <class T>
  Tensor<T> batch(std::span<const std::size_t> indices) const {
    Tensor<T> t(Shape{indices.size(), channels(), size_, size_});
    const std::size_t stride = channels() * size_ * size_;
    for (std::size_t n = 0; n < indices.size(); ++n) write_patch(indices[n], t.data() + n * stride);
    return t;
  }

  /// Flat pixel indices of every sample center.
  std::vector<std::size_t> center_pixels() const {
    std::vector<std::size_t> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(std::size_t{s.row} * cube_->width + s.col);
    return out;
  }

 private:
  std::shared_ptr<const ChannelCube> cube_;
  std::size_t size_ = 14;
  SplitTag tag_ = SplitTag::all_labeled;
  std::vector<Sample> samples_;
};

/// Number of fully-inside windows of a raw sliding sweep.
inline std::size_t sliding_window_count(std::size_t height, std::size_t width, std::size_t size,
                                        std::size_t stride = 1) {
  if (size > height || size > width || stride == 0) return 0;
  return ((height - size) / stride + 1) * ((width - size) / stride + 1);
}

/// One patch per labeled pixel, row-major by center.
inline PatchSet extract_patches(std::shared_ptr<const ChannelCube> cube, const LabelMap& labels,
                                std::size_t size = 14) {
  if (size == 0) throw DataError("patch size must be positive");
  if (labels.height != cube->height || labels.width != cube->width)
    throw DataError("label map " + std::to_string(labels.height) + "x" +
                    std::to_string(labels.width) + " does not match cube " +
                    std::to_string(cube->height) + "x" + std::to_string(cube->width));
  PatchSet set(cube, size, SplitTag::all_labeled);
  for (std::size_t y = 0; y < labels.height; ++y)
    for (std::size_t x = 0; x < labels.width; ++x)
      if (const auto l = labels.at(y, x); l != 0)
        set.push_back({static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x), l});
  if (set.empty()) throw DataError("label map has no labeled pixels");
  return set;
}

/// Every pixel of the cube (label 0), row-major; used for whole-map sweeps.
/// `stride` subsamples centers.
inline PatchSet all_pixels(std::shared_ptr<const ChannelCube> cube, std::size_t size = 14,
                           std::size_t stride = 1) {
  if (stride == 0) throw DataError("stride must be positive");
  PatchSet set(cube, size, SplitTag::all_labeled);
  for (std::size_t y = 0; y < cube->height; y += stride)
    for (std::size_t x = 0; x < cube->width; x += stride)
      set.push_back({static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x), 0});
  return set;
}

struct SplitOptions {
  /// Draw min(per_class, available) instead of failing on small classes.
  bool cap_at_available = false;
  /// Evaluate on every labeled sample (training ones included) rather than on
  /// the held-out remainder.
  bool test_includes_train = false;
};

struct SplitResult {
  PatchSet train, test;
  std::vector<std::size_t> train_per_class;  // index 0 unused
};

/// Uniform per-class draw without replacement for training.
inline SplitResult sample_split(const PatchSet& patches, std::size_t per_class,
                                std::uint64_t seed, std::size_t classes,
                                SplitOptions opt = {}, std::ostream* log = nullptr) {
  std::vector<std::vector<std::size_t>> by_class(classes + 1);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto l = patches[i].label;
    if (l == 0 || l > classes) throw DataError("sample_split: invalid label " + std::to_string(l));
    by_class[l].push_back(i);
  }
  std::string short_classes;
  for (std::size_t c = 1; c <= classes; ++c)
    if (by_class[c].size() < per_class)
      short_classes += " " + std::to_string(c) + "(" + std::to_string(by_class[c].size()) + ")";
  if (!short_classes.empty() && !opt.cap_at_available)
    throw DataError("classes with fewer than " + std::to_string(per_class) +
                    " labeled samples:" + short_classes);

  Rng rng(seed);
  std::vector<std::size_t> train_idx;
  std::vector<bool> in_train(patches.size(), false);
  SplitResult out;
  out.train_per_class.assign(classes + 1, 0);
  for (std::size_t c = 1; c <= classes; ++c) {
    auto pool = by_class[c];
    rng.shuffle(std::span<std::size_t>(pool));
    const std::size_t take = std::min(per_class, pool.size());
    for (std::size_t i = 0; i < take; ++i) {
      train_idx.push_back(pool[i]);
      in_train[pool[i]] = true;
    }
    out.train_per_class[c] = take;
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::vector<std::size_t> test_idx;
  for (std::size_t i = 0; i < patches.size(); ++i)
    if (opt.test_includes_train || !in_train[i]) test_idx.push_back(i);

  if (log) {
    *log << "training samples per class:";
    for (std::size_t c = 1; c <= classes; ++c) *log << ' ' << out.train_per_class[c];
    *log << " (total " << train_idx.size() << ")\n";
  }
  out.train = patches.subset(train_idx, SplitTag::train);
  out.test = patches.subset(test_idx, SplitTag::test);
  return out;
}

}  // namespace polsar::data
