#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "polsar/core/kv_config.hpp"
#include "polsar/core/rng.hpp"
#include "polsar/data/polsar_image.hpp"

namespace polsar::data {

/// Circular complex Gaussian scattering statistics of one class. S_HV is
/// uncorrelated with the co-pol channels; S_HH and S_VV have complex
/// correlation coefficient hhvv_corr * exp(i hhvv_phase).
struct SynthClass {
  std::string name;
  double hh_power = 1.0;
  double hv_power = 0.1;
  double vv_power = 1.0;
  double hhvv_corr = 0.0;
  double hhvv_phase = 0.0;
};

struct SynthSpec {
  std::size_t height = 128, width = 128;
  std::size_t block = 32;  // side of the square class tiles
  std::uint64_t seed = 1;
  std::vector<SynthClass> classes;

  /// Keys: height, width, block, seed, classes, and per class i (1-based)
  /// class<i>.name, .hh_power, .hv_power, .vv_power, .hhvv_corr, .hhvv_phase.
  static SynthSpec from_config(const KeyValueConfig& cfg) {
    SynthSpec s;
    s.height = cfg.number<std::size_t>("height", s.height);
    s.width = cfg.number<std::size_t>("width", s.width);
    s.block = cfg.number<std::size_t>("block", s.block);
    s.seed = cfg.number<std::uint64_t>("seed", s.seed);
    const auto n = cfg.number<std::size_t>("classes");
    for (std::size_t i = 1; i <= n; ++i) {
      const auto p = "class" + std::to_string(i) + ".";
      SynthClass c;
      c.name = cfg.str(p + "name", "class" + std::to_string(i));
      c.hh_power = cfg.number<double>(p + "hh_power");
      c.hv_power = cfg.number<double>(p + "hv_power");
      c.vv_power = cfg.number<double>(p + "vv_power");
      c.hhvv_corr = cfg.number<double>(p + "hhvv_corr", 0.0);
      c.hhvv_phase = cfg.number<double>(p + "hhvv_phase", 0.0);
      s.classes.push_back(c);
    }
    s.validate();
    return s;
  }

  void validate() const {
    if (classes.size() < 2) throw DataError("synthetic spec needs at least 2 classes");
    if (height == 0 || width == 0 || block == 0) throw DataError("synthetic spec: zero dimension");
    for (const auto& c : classes) {
      if (!(c.hh_power > 0 && c.hv_power >= 0 && c.vv_power > 0))
        throw DataError("synthetic class " + c.name + ": powers must be positive");
      if (c.hhvv_corr < 0 || c.hhvv_corr > 1)
        throw DataError("synthetic class " + c.name + ": correlation must lie in [0,1]");
    }
    const std::size_t tiles = ((height + block - 1) / block) * ((width + block - 1) / block);
    if (tiles < classes.size())
      throw DataError("synthetic spec: fewer tiles than classes; reduce block size");
  }

  /// Three canonical scattering mechanisms: odd bounce, double bounce, volume.
  static SynthSpec three_class_default(std::size_t size = 128, std::uint64_t seed = 7) {
    SynthSpec s;
    s.height = s.width = size;
    s.seed = seed;
    s.classes = {{"surface", 1.0, 0.05, 0.8, 0.9, 0.0},
                 {"double_bounce", 1.2, 0.08, 0.6, 0.8, 3.14159265358979},
                 {"volume", 0.5, 0.35, 0.5, 0.3, 0.0}};
    return s;
  }
};

struct SynthScene {
  ScatteringImage scattering;
  LabelMap labels;
};

/// Blocky scene: square tiles, each tile one class; every class appears.
inline SynthScene generate_scene(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t ty = (spec.height + spec.block - 1) / spec.block;
  const std::size_t tx = (spec.width + spec.block - 1) / spec.block;
  std::vector<std::uint16_t> tile_class(ty * tx);
  for (std::size_t i = 0; i < tile_class.size(); ++i)
    tile_class[i] = static_cast<std::uint16_t>(i % spec.classes.size() + 1);
  rng.shuffle(std::span<std::uint16_t>(tile_class));

  std::vector<std::string> names;
  for (const auto& c : spec.classes) names.push_back(c.name);
  SynthScene scene{ScatteringImage(spec.height, spec.width),
                   LabelMap(spec.height, spec.width, names)};

  auto cn = [&rng]() {
    const double s = std::sqrt(0.5);
    const double re = rng.gaussian(0.0, s);
    const double im = rng.gaussian(0.0, s);
    return Complex(re, im);
  };
  for (std::size_t y = 0; y < spec.height; ++y)
    for (std::size_t x = 0; x < spec.width; ++x) {
      const auto label = tile_class[(y / spec.block) * tx + x / spec.block];
      const auto& c = spec.classes[label - 1];
      const Complex z1 = cn(), z2 = cn(), z3 = cn();
      const Complex rho = std::polar(c.hhvv_corr, c.hhvv_phase);
      const double resid = std::sqrt(std::max(0.0, 1.0 - c.hhvv_corr * c.hhvv_corr));
      const std::size_t i = y * spec.width + x;
      scene.scattering.hh[i] = std::sqrt(c.hh_power) * z1;
      scene.scattering.vv[i] = std::sqrt(c.vv_power) * (std::conj(rho) * z1 + resid * z2);
      scene.scattering.hv[i] = std::sqrt(c.hv_power) * z3;
      scene.labels.at(y, x) = label;
    }
  return scene;
}

}  // namespace polsar::data
