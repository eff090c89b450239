#pragma once

#include <png.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <vector>

#include "polsar/core/binary_io.hpp"
#include "polsar/data/polsar_image.hpp"

namespace polsar::app {

using Rgb = std::array<std::uint8_t, 3>;

/// Class id -> color. Id 0 (unlabeled) is black; ids beyond the fixed table
/// walk the hue circle by the golden angle.
class ClassPalette {
 public:
  explicit ClassPalette(std::size_t classes) {
    static constexpr Rgb base[] = {
        {255, 0, 0},     {0, 170, 0},     {0, 0, 255},     {255, 255, 0},   {255, 0, 255},
        {0, 255, 255},   {255, 128, 0},   {128, 0, 255},   {0, 128, 128},   {128, 255, 0},
        {255, 128, 192}, {128, 64, 0},    {160, 160, 255}, {255, 255, 160}, {128, 128, 128}};
    colors_.push_back({0, 0, 0});
    for (std::size_t c = 0; c < classes; ++c) {
      if (c < std::size(base)) {
        colors_.push_back(base[c]);
        continue;
      }
      const double h = std::fmod(static_cast<double>(c) * 137.50776405, 360.0) / 60.0;
      const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
      double r = 0, g = 0, b = 0;
      switch (static_cast<int>(h)) {
        case 0: r = 1, g = x; break;
        case 1: r = x, g = 1; break;
        case 2: g = 1, b = x; break;
        case 3: g = x, b = 1; break;
        case 4: r = x, b = 1; break;
        default: r = 1, b = x; break;
      }
      const double v = 0.55 + 0.4 * static_cast<double>(c % 2);
      colors_.push_back({static_cast<std::uint8_t>(255 * r * v), static_cast<std::uint8_t>(255 * g * v),
                         static_cast<std::uint8_t>(255 * b * v)});
    }
  }

  const Rgb& operator[](std::size_t id) const {
    if (id >= colors_.size()) throw DataError("no palette entry for class " + std::to_string(id));
    return colors_[id];
  }
  std::size_t size() const { return colors_.size(); }

 private:
  std::vector<Rgb> colors_;
};

/// Row-major RGB image of a label map. With `mask`, pixels unlabeled in the
/// mask are drawn black regardless of the predicted class.
inline std::vector<std::uint8_t> render(const data::LabelMap& map, const ClassPalette& palette,
                                        const data::LabelMap* mask = nullptr) {
  if (mask && (mask->height != map.height || mask->width != map.width))
    throw DataError("overlay label map size differs from the class map");
  std::vector<std::uint8_t> rgb(map.height * map.width * 3);
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    const auto id = (mask && mask->labels[i] == 0) ? 0 : map.labels[i];
    const auto& c = palette[id];
    std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return rgb;
}

inline void write_png(std::ostream& os, std::size_t width, std::size_t height,
                      const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != width * height * 3) throw DataError("PNG: pixel buffer size mismatch");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("PNG: cannot create writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("PNG: cannot create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG: encoding failed");
  }
  png_set_write_fn(
      png, &os,
      [](png_structp p, png_bytep data, png_size_t n) {
        static_cast<std::ostream*>(png_get_io_ptr(p))
            ->write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
      },
      [](png_structp p) { static_cast<std::ostream*>(png_get_io_ptr(p))->flush(); });
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + y * width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline void save_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
                     const std::vector<std::uint8_t>& rgb) {
  io::write_file_atomic(path, [&](std::ostream& os) { write_png(os, width, height, rgb); });
}

/// Width and height from a PNG header (for round-trip checks).
inline std::pair<std::size_t, std::size_t> png_size(const std::filesystem::path& path) {
  auto is = io::open_input(path);
  unsigned char head[24];
  if (!is.read(reinterpret_cast<char*>(head), 24) || png_sig_cmp(head, 0, 8) != 0)
    throw DataError(path.string() + " is not a PNG file");
  auto be32 = [&](int off) {
    return (std::size_t{head[off]} << 24) | (std::size_t{head[off + 1]} << 16) |
           (std::size_t{head[off + 2]} << 8) | std::size_t{head[off + 3]};
  };
  return {be32(16), be32(20)};
}

}  // namespace polsar::app
