#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "polsar/core/binary_io.hpp"
#include "polsar/data/polsar_image.hpp"

// PTC1 raster container:
//   "PTC1", u32 height, u32 width, u8 plane count,
//   plane names (null-terminated utf-8, one per plane),
//   little-endian float32 planes, row-major, in table order.
//
// PLBL1 label map:
//   "PLBL1", u32 height, u32 width, u16 class count c,
//   c null-terminated class names, u16 label per pixel (0 = unlabeled).

namespace polsar::data {

struct Raster {
  std::size_t height = 0, width = 0;
  std::vector<std::string> names;
  std::vector<std::vector<float>> planes;

  bool has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
  }
  const std::vector<float>& plane(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("raster has no plane named " + name);
    return planes[static_cast<std::size_t>(it - names.begin())];
  }
};

inline const std::vector<std::string>& scattering_plane_names() {
  static const std::vector<std::string> n{"ReSHH", "ImSHH", "ReSHV", "ImSHV", "ReSVV", "ImSVV"};
  return n;
}

inline void write_ptc1(std::ostream& os, const Raster& r) {
  if (r.names.size() != r.planes.size() || r.names.size() > 255)
    throw DataError("PTC1: invalid plane table");
  io::Writer w(os);
  w.magic("PTC1");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(r.height));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(r.width));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(r.names.size()));
  for (const auto& n : r.names) w.cstring(n);
  for (const auto& p : r.planes) {
    if (p.size() != r.height * r.width) throw DataError("PTC1: plane size mismatch");
    for (float v : p) w.put<float>(v);
  }
}

inline Raster read_ptc1(std::istream& is, const std::string& context = "PTC1") {
  io::Reader rd(is, context);
  rd.expect_magic("PTC1");
  Raster r;
  r.height = rd.get<std::uint32_t>();
  r.width = rd.get<std::uint32_t>();
  if (r.height == 0 || r.width == 0) rd.fail("empty raster dimensions");
  if (r.height * r.width > (std::size_t{1} << 31)) rd.fail("raster too large");
  const auto count = rd.get<std::uint8_t>();
  if (count == 0) rd.fail("raster has no planes");
  for (std::size_t i = 0; i < count; ++i) r.names.push_back(rd.cstring(255));
  r.planes.assign(count, std::vector<float>(r.height * r.width));
  for (auto& p : r.planes)
    for (auto& v : p) v = rd.get<float>();
  return r;
}

inline void save_ptc1(const std::filesystem::path& path, const Raster& r) {
  io::write_file_atomic(path, [&](std::ostream& os) { write_ptc1(os, r); });
}

inline Raster load_ptc1(const std::filesystem::path& path) {
  auto is = io::open_input(path);
  return read_ptc1(is, path.string());
}

inline void write_plbl1(std::ostream& os, const LabelMap& m) {
  io::Writer w(os);
  w.magic("PLBL1");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.height));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.width));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(m.classes()));
  for (const auto& n : m.class_names) w.cstring(n);
  for (auto l : m.labels) w.put<std::uint16_t>(l);
}

inline LabelMap read_plbl1(std::istream& is, const std::string& context = "PLBL1") {
  io::Reader rd(is, context);
  rd.expect_magic("PLBL1");
  LabelMap m;
  m.height = rd.get<std::uint32_t>();
  m.width = rd.get<std::uint32_t>();
  if (m.height == 0 || m.width == 0) rd.fail("empty label map dimensions");
  if (m.height * m.width > (std::size_t{1} << 31)) rd.fail("label map too large");
  const auto classes = rd.get<std::uint16_t>();
  for (std::size_t i = 0; i < classes; ++i) m.class_names.push_back(rd.cstring());
  m.labels.resize(m.height * m.width);
  for (auto& l : m.labels) {
    l = rd.get<std::uint16_t>();
    if (l > classes) rd.fail("label " + std::to_string(l) + " exceeds class count");
  }
  return m;
}

inline void save_plbl1(const std::filesystem::path& path, const LabelMap& m) {
  io::write_file_atomic(path, [&](std::ostream& os) { write_plbl1(os, m); });
}

inline LabelMap load_plbl1(const std::filesystem::path& path) {
  auto is = io::open_input(path);
  return read_plbl1(is, path.string());
}

// ---- conversions between rasters and domain images ----

inline bool is_scattering_raster(const Raster& r) {
  for (const auto& n : scattering_plane_names())
    if (!r.has(n)) return false;
  return true;
}

inline bool is_coherency_raster(const Raster& r) {
  for (const auto& n : plane_names(ChannelForm::real_imag))
    if (!r.has(n)) return false;
  return true;
}

inline bool is_amp_phase_raster(const Raster& r) {
  for (const auto& n : plane_names(ChannelForm::amp_phase))
    if (!r.has(n)) return false;
  return true;
}

inline ScatteringImage scattering_from_raster(const Raster& r) {
  ScatteringImage s(r.height, r.width);
  const auto& rhh = r.plane("ReSHH");
  const auto& ihh = r.plane("ImSHH");
  const auto& rhv = r.plane("ReSHV");
  const auto& ihv = r.plane("ImSHV");
  const auto& rvv = r.plane("ReSVV");
  const auto& ivv = r.plane("ImSVV");
  for (std::size_t i = 0; i < s.pixels(); ++i) {
    s.hh[i] = {rhh[i], ihh[i]};
    s.hv[i] = {rhv[i], ihv[i]};
    s.vv[i] = {rvv[i], ivv[i]};
  }
  return s;
}

inline Raster raster_from_scattering(const ScatteringImage& s) {
  Raster r{s.height, s.width, scattering_plane_names(), {}};
  r.planes.assign(6, std::vector<float>(s.pixels()));
  for (std::size_t i = 0; i < s.pixels(); ++i) {
    r.planes[0][i] = static_cast<float>(s.hh[i].real());
    r.planes[1][i] = static_cast<float>(s.hh[i].imag());
    r.planes[2][i] = static_cast<float>(s.hv[i].real());
    r.planes[3][i] = static_cast<float>(s.hv[i].imag());
    r.planes[4][i] = static_cast<float>(s.vv[i].real());
    r.planes[5][i] = static_cast<float>(s.vv[i].imag());
  }
  return r;
}

inline CoherencyImage coherency_from_raster(const Raster& r) {
  CoherencyImage t(r.height, r.width);
  const auto& t11 = r.plane("T11");
  const auto& t22 = r.plane("T22");
  const auto& t33 = r.plane("T33");
  const auto& r12 = r.plane("ReT12");
  const auto& i12 = r.plane("ImT12");
  const auto& r13 = r.plane("ReT13");
  const auto& i13 = r.plane("ImT13");
  const auto& r23 = r.plane("ReT23");
  const auto& i23 = r.plane("ImT23");
  for (std::size_t i = 0; i < t.pixels(); ++i) {
    t.t11[i] = t11[i];
    t.t22[i] = t22[i];
    t.t33[i] = t33[i];
    t.t12[i] = {r12[i], i12[i]};
    t.t13[i] = {r13[i], i13[i]};
    t.t23[i] = {r23[i], i23[i]};
  }
  return t;
}

inline Raster raster_from_cube(const ChannelCube& cube) {
  Raster r{cube.height, cube.width, plane_names(cube.form), {}};
  if (cube.channels != r.names.size()) throw DataError("cube channel count does not match its form");
  for (std::size_t c = 0; c < cube.channels; ++c) {
    const auto p = cube.plane(c);
    r.planes.emplace_back(p.begin(), p.end());
  }
  return r;
}

/// Interpret a 9-plane raster as a channel cube. T-matrix planes read as the
/// real_imag form.
inline ChannelCube cube_from_raster(const Raster& r) {
  ChannelForm form;
  if (is_amp_phase_raster(r))
    form = ChannelForm::amp_phase;
  else if (is_coherency_raster(r))
    form = ChannelForm::real_imag;
  else
    throw DataError("raster is not a channel cube (missing canonical plane names)");
  ChannelCube cube(r.height, r.width, 9, form);
  const auto& names = plane_names(form);
  for (std::size_t c = 0; c < 9; ++c) {
    const auto& p = r.plane(names[c]);
    std::copy(p.begin(), p.end(), cube.plane(c).begin());
  }
  return cube;
}

/// Plain-text sidecar "<channel> <mean> <std>" per line.
inline std::string format_stats(const ChannelCube& cube, const ChannelStats& s) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "# channel mean std (form " << to_string(cube.form) << ")\n";
  const auto& names = plane_names(cube.form);
  for (std::size_t c = 0; c < s.mean.size(); ++c)
    os << (c < names.size() ? names[c] : std::to_string(c)) << ' ' << s.mean[c] << ' '
       << s.stddev[c] << '\n';
  return os.str();
}

}  // namespace polsar::data
