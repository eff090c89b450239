#pragma once

#include <array>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "polsar/core/kv_config.hpp"
#include "polsar/data/polsar_image.hpp"
#include "polsar/nn/layers.hpp"

namespace polsar::models {

enum class Variant { CNN_v1, CNN_v2, VGG_v1, VGG_v2, MCNN, DMCNN, M1, M2, M3, M4, M5, M6 };

inline const std::vector<std::pair<Variant, std::string>>& variant_names() {
  static const std::vector<std::pair<Variant, std::string>> names{
      {Variant::CNN_v1, "CNN_v1"}, {Variant::CNN_v2, "CNN_v2"}, {Variant::VGG_v1, "VGG_v1"},
      {Variant::VGG_v2, "VGG_v2"}, {Variant::MCNN, "MCNN"},     {Variant::DMCNN, "DMCNN"},
      {Variant::M1, "M1"},         {Variant::M2, "M2"},         {Variant::M3, "M3"},
      {Variant::M4, "M4"},         {Variant::M5, "M5"},         {Variant::M6, "M6"}};
  return names;
}

inline std::string to_string(Variant v) {
  for (const auto& [k, n] : variant_names())
    if (k == v) return n;
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (const auto& [k, n] : variant_names())
    if (n == s) return k;
  throw UsageError("unknown model variant '" + s + "'");
}

/// Cube form a variant consumes: v1 baselines read real/imag, everything else
/// amplitude/phase.
inline data::ChannelForm required_form(Variant v) {
  return (v == Variant::CNN_v1 || v == Variant::VGG_v1) ? data::ChannelForm::real_imag
                                                        : data::ChannelForm::amp_phase;
}

enum class FusionSource { block2, block3 };

/// Architecture knobs shared by every variant.
struct ModelConfig {
  Variant variant = Variant::MCNN;
  std::size_t classes = 3;
  std::size_t input_channels = 9;
  std::size_t patch = 14;
  std::array<std::size_t, 3> widths{32, 64, 64};
  nn::DenseBlockConfig dense{5, 16, 4};
  std::array<double, 3> alpha{1.0, 1.0, 1.0};  // side-loss weights: phase, amplitude, fusion
  double conv_drop = 0.2;                       // drop probability inside conv blocks
  double fc_drop = 0.5;
  std::size_t fc_width = 128;
  FusionSource fusion_source = FusionSource::block3;
  std::uint64_t seed = 1;

  /// EMISAR-style reduced widths: 12/24/24, growth 12, multiplier 2, no
  /// dropout in convolution blocks.
  static ModelConfig compact(Variant v, std::size_t classes) {
    ModelConfig c;
    c.variant = v;
    c.classes = classes;
    c.widths = {12, 24, 24};
    c.dense = {5, 12, 2};
    c.conv_drop = 0.0;
    return c;
  }

  void read(const KeyValueConfig& kv) {
    if (kv.has("variant")) variant = parse_variant(kv.str("variant"));
    classes = kv.number<std::size_t>("classes", classes);
    patch = kv.number<std::size_t>("patch", patch);
    if (kv.has("widths")) {
      auto w = kv.list<std::size_t>("widths");
      if (w.size() != 3) throw DataError("config key 'widths' needs three values");
      widths = {w[0], w[1], w[2]};
    }
    dense.layers = kv.number<std::size_t>("dense_layers", dense.layers);
    dense.growth = kv.number<std::size_t>("growth_rate", dense.growth);
    dense.first_multiplier = kv.number<std::size_t>("growth_multiplier", dense.first_multiplier);
    if (kv.has("alpha")) {
      auto a = kv.list<double>("alpha");
      if (a.size() != 3) throw DataError("config key 'alpha' needs three values");
      alpha = {a[0], a[1], a[2]};
    }
    // Conv dropout may be given either as a drop or a keep probability.
    if (kv.has("conv_keep_prob")) conv_drop = 1.0 - kv.number<double>("conv_keep_prob");
    conv_drop = kv.number<double>("conv_drop", conv_drop);
    fc_drop = kv.number<double>("fc_drop", fc_drop);
    fc_width = kv.number<std::size_t>("fc_width", fc_width);
    if (kv.has("fusion_source")) {
      const auto s = kv.str("fusion_source");
      if (s == "block2")
        fusion_source = FusionSource::block2;
      else if (s == "block3")
        fusion_source = FusionSource::block3;
      else
        throw DataError("fusion_source must be block2 or block3");
    }
    seed = kv.number<std::uint64_t>("seed", seed);
    validate();
  }

  void write(KeyValueConfig& kv) const {
    std::ostringstream os;
    os.precision(17);
    kv.set("variant", to_string(variant));
    kv.set("classes", std::to_string(classes));
    kv.set("patch", std::to_string(patch));
    kv.set("widths", std::to_string(widths[0]) + "," + std::to_string(widths[1]) + "," +
                         std::to_string(widths[2]));
    kv.set("dense_layers", std::to_string(dense.layers));
    kv.set("growth_rate", std::to_string(dense.growth));
    kv.set("growth_multiplier", std::to_string(dense.first_multiplier));
    os << alpha[0] << ',' << alpha[1] << ',' << alpha[2];
    kv.set("alpha", os.str());
    auto num = [](double v) {
      std::ostringstream s;
      s.precision(17);
      s << v;
      return s.str();
    };
    kv.set("conv_drop", num(conv_drop));
    kv.set("fc_drop", num(fc_drop));
    kv.set("fc_width", std::to_string(fc_width));
    kv.set("fusion_source", fusion_source == FusionSource::block2 ? "block2" : "block3");
    kv.set("seed", std::to_string(seed));
  }

  void validate() const {
    if (classes < 2) throw DataError("model needs at least 2 classes");
    if (patch < 4) throw DataError("patch size must be at least 4");
    for (auto w : widths)
      if (w == 0) throw DataError("convolution widths must be positive");
    if (conv_drop < 0 || conv_drop >= 1 || fc_drop < 0 || fc_drop >= 1)
      throw DataError("dropout probabilities must lie in [0, 1)");
    if (fc_width == 0) throw DataError("fc_width must be positive");
  }
};

}  // namespace polsar::models
