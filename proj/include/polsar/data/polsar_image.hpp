#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polsar/core/error.hpp"

namespace polsar::data {

using Complex = std::complex<double>;

/// Per-pixel S_HH, S_HV, S_VV (S_VH = S_HV by reciprocity).
struct ScatteringImage {
  std::size_t height = 0, width = 0;
  std::vector<Complex> hh, hv, vv;

  ScatteringImage() = default;
  ScatteringImage(std::size_t h, std::size_t w)
      : height(h), width(w), hh(h * w), hv(h * w), vv(h * w) {}
  std::size_t pixels() const { return height * width; }
};

struct PauliField {
  std::size_t height = 0, width = 0;
  std::vector<std::array<Complex, 3>> k;
  std::size_t pixels() const { return height * width; }
};

/// Upper triangle of the 3x3 Hermitian coherency matrix per pixel.
struct CoherencyImage {
  std::size_t height = 0, width = 0;
  std::vector<double> t11, t22, t33;
  std::vector<Complex> t12, t13, t23;

  CoherencyImage() = default;
  CoherencyImage(std::size_t h, std::size_t w)
      : height(h), width(w), t11(h * w), t22(h * w), t33(h * w), t12(h * w), t13(h * w),
        t23(h * w) {}
  std::size_t pixels() const { return height * width; }
};

enum class ChannelForm { amp_phase, real_imag };

inline const char* to_string(ChannelForm f) {
  return f == ChannelForm::amp_phase ? "amp_phase" : "real_imag";
}

inline ChannelForm parse_form(const std::string& s) {
  if (s == "amp_phase") return ChannelForm::amp_phase;
  if (s == "real_imag") return ChannelForm::real_imag;
  throw UsageError("unknown input form '" + s + "' (expected amp_phase or real_imag)");
}

/// Canonical plane names of each cube form, in channel order.
inline const std::vector<std::string>& plane_names(ChannelForm f) {
  static const std::vector<std::string> amp{"T11",    "T22",    "T33",    "AmpT12", "AmpT13",
                                            "AmpT23", "PhaT12", "PhaT13", "PhaT23"};
  static const std::vector<std::string> ri{"T11",   "T22",   "T33",   "ReT12", "ImT12",
                                           "ReT13", "ImT13", "ReT23", "ImT23"};
  return f == ChannelForm::amp_phase ? amp : ri;
}

struct ChannelStats {
  std::vector<double> mean, stddev;
};

/// Real-valued planar raster [C][H][W].
struct ChannelCube {
  std::size_t height = 0, width = 0, channels = 0;
  ChannelForm form = ChannelForm::amp_phase;
  std::vector<float> data;
  std::optional<ChannelStats> stats;  // set once normalized

  ChannelCube() = default;
  ChannelCube(std::size_t h, std::size_t w, std::size_t c, ChannelForm f)
      : height(h), width(w), channels(c), form(f), data(h * w * c, 0.0f) {}

  std::size_t pixels() const { return height * width; }
  float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
  std::span<float> plane(std::size_t c) { return {data.data() + c * pixels(), pixels()}; }
  std::span<const float> plane(std::size_t c) const {
    return {data.data() + c * pixels(), pixels()};
  }
};

/// Class id per pixel; 0 is unlabeled, classes are 1..c.
struct LabelMap {
  std::size_t height = 0, width = 0;
  std::vector<std::uint16_t> labels;
  std::vector<std::string> class_names;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::vector<std::string> names)
      : height(h), width(w), labels(h * w, 0), class_names(std::move(names)) {}

  std::size_t classes() const { return class_names.size(); }
  std::uint16_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  std::uint16_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(classes() + 1, 0);
    for (auto l : labels) {
      if (l > classes()) throw DataError("label " + std::to_string(l) + " exceeds class count");
      ++counts[l];
    }
    return counts;
  }
};

/// k = (1/sqrt2) [S_HH + S_VV, S_HH - S_VV, 2 S_HV] per pixel.
inline PauliField pauli_vector(const ScatteringImage& s) {
  PauliField f{s.height, s.width, std::vector<std::array<Complex, 3>>(s.pixels())};
  const double inv = 1.0 / std::numbers::sqrt2;
  for (std::size_t i = 0; i < s.pixels(); ++i) {
    const Complex hh = s.hh[i], hv = s.hv[i], vv = s.vv[i];
    if (!std::isfinite(hh.real()) || !std::isfinite(hh.imag()) || !std::isfinite(hv.real()) ||
        !std::isfinite(hv.imag()) || !std::isfinite(vv.real()) || !std::isfinite(vv.imag()))
      throw DataError("non-finite scattering value at pixel " + std::to_string(i));
    f.k[i] = {inv * (hh + vv), inv * (hh - vv), inv * 2.0 * hv};
  }
  return f;
}

/// Boxcar mean of k k^H over a window x window neighborhood, edge-replicated.
inline CoherencyImage coherency_matrix(const PauliField& k, std::size_t window) {
  if (window == 0 || window % 2 == 0)
    throw DataError("coherency window must be a positive odd integer, got " +
                    std::to_string(window));
  const std::size_t h = k.height, w = k.width;
  CoherencyImage t(h, w);
  const long r = static_cast<long>(window / 2);
  const double inv = 1.0 / static_cast<double>(window * window);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double a11 = 0, a22 = 0, a33 = 0;
      Complex a12, a13, a23;
      for (long dy = -r; dy <= r; ++dy) {
        const auto sy = static_cast<std::size_t>(
            std::clamp(static_cast<long>(y) + dy, 0L, static_cast<long>(h) - 1));
        for (long dx = -r; dx <= r; ++dx) {
          const auto sx = static_cast<std::size_t>(
              std::clamp(static_cast<long>(x) + dx, 0L, static_cast<long>(w) - 1));
          const auto& v = k.k[sy * w + sx];
          a11 += std::norm(v[0]);
          a22 += std::norm(v[1]);
          a33 += std::norm(v[2]);
          a12 += v[0] * std::conj(v[1]);
          a13 += v[0] * std::conj(v[2]);
          a23 += v[1] * std::conj(v[2]);
        }
      }
      const std::size_t i = y * w + x;
      t.t11[i] = a11 * inv;
      t.t22[i] = a22 * inv;
      t.t33[i] = a33 * inv;
      t.t12[i] = a12 * inv;
      t.t13[i] = a13 * inv;
      t.t23[i] = a23 * inv;
    }
  return t;
}

/// Four-quadrant phase in (-pi, pi]; the origin maps to 0.
inline double phase_angle(double a, double b) {
  if (a == 0.0 && b == 0.0) return 0.0;
  if (b == 0.0 && a < 0.0) return std::numbers::pi;  // keeps -0.0 imaginary parts at +pi
  return std::atan2(b, a);
}

inline double amplitude(double a, double b) { return std::hypot(a, b); }

inline ChannelCube to_amplitude_phase(const CoherencyImage& t) {
  ChannelCube cube(t.height, t.width, 9, ChannelForm::amp_phase);
  for (std::size_t i = 0; i < t.pixels(); ++i) {
    const std::array<Complex, 3> off{t.t12[i], t.t13[i], t.t23[i]};
    cube.data[0 * t.pixels() + i] = static_cast<float>(t.t11[i]);
    cube.data[1 * t.pixels() + i] = static_cast<float>(t.t22[i]);
    cube.data[2 * t.pixels() + i] = static_cast<float>(t.t33[i]);
    for (std::size_t j = 0; j < 3; ++j) {
      cube.data[(3 + j) * t.pixels() + i] =
          static_cast<float>(amplitude(off[j].real(), off[j].imag()));
      cube.data[(6 + j) * t.pixels() + i] =
          static_cast<float>(phase_angle(off[j].real(), off[j].imag()));
    }
  }
  return cube;
}

inline ChannelCube to_real_imag(const CoherencyImage& t) {
  ChannelCube cube(t.height, t.width, 9, ChannelForm::real_imag);
  for (std::size_t i = 0; i < t.pixels(); ++i) {
    const std::array<Complex, 3> off{t.t12[i], t.t13[i], t.t23[i]};
    cube.data[0 * t.pixels() + i] = static_cast<float>(t.t11[i]);
    cube.data[1 * t.pixels() + i] = static_cast<float>(t.t22[i]);
    cube.data[2 * t.pixels() + i] = static_cast<float>(t.t33[i]);
    for (std::size_t j = 0; j < 3; ++j) {
      cube.data[(3 + 2 * j) * t.pixels() + i] = static_cast<float>(off[j].real());
      cube.data[(4 + 2 * j) * t.pixels() + i] = static_cast<float>(off[j].imag());
    }
  }
  return cube;
}

inline ChannelCube to_form(const CoherencyImage& t, ChannelForm form) {
  return form == ChannelForm::amp_phase ? to_amplitude_phase(t) : to_real_imag(t);
}

/// Per-channel mean/std over the given flat pixel indices (all pixels if empty).
inline ChannelStats compute_channel_stats(const ChannelCube& cube,
                                          std::span<const std::size_t> pixels = {}) {
  ChannelStats s{std::vector<double>(cube.channels), std::vector<double>(cube.channels)};
  const std::size_t n = pixels.empty() ? cube.pixels() : pixels.size();
  if (n == 0) throw DataError("channel statistics need at least one pixel");
  for (std::size_t c = 0; c < cube.channels; ++c) {
    const auto p = cube.plane(c);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += p[pixels.empty() ? i : pixels[i]];
    const double mu = acc / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = p[pixels.empty() ? i : pixels[i]] - mu;
      sq += d * d;
    }
    s.mean[c] = mu;
    s.stddev[c] = std::sqrt(sq / static_cast<double>(n));
  }
  return s;
}

/// Per-channel z-score. Without `stats`, statistics come from the whole cube.
/// A zero-variance channel is centered but left unscaled.
inline ChannelCube normalize(const ChannelCube& cube, const std::optional<ChannelStats>& stats = {},
                             std::ostream* warn = &std::cerr) {
  const ChannelStats s = stats ? *stats : compute_channel_stats(cube);
  if (s.mean.size() != cube.channels || s.stddev.size() != cube.channels)
    throw DataError("normalization stats have " + std::to_string(s.mean.size()) +
                    " channels, cube has " + std::to_string(cube.channels));
  ChannelCube out = cube;
  for (std::size_t c = 0; c < cube.channels; ++c) {
    double sd = s.stddev[c];
    if (!(sd > 0.0)) {
      if (warn) *warn << "warning: channel " << c << " has zero variance; left unscaled\n";
      sd = 1.0;
    }
    for (auto& v : out.plane(c)) v = static_cast<float>((v - s.mean[c]) / sd);
  }
  out.stats = s;
  return out;
}

}  // namespace polsar::data
