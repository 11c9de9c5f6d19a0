#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "mff/depth_map.hpp"
#include "mff/errors.hpp"

// PNG interchange for depth rasters and guide images.
//   16-bit grayscale depth: value = round(meters / scale), 0 = invalid.
//   Guide images: any gray/RGB 8- or 16-bit PNG, reduced to Rec.601 luma
//   in [0, 1].

namespace mff {

namespace detail {

struct PngFile {
  std::FILE* fp = nullptr;
  explicit PngFile(const std::filesystem::path& path, const char* mode)
      : fp(std::fopen(path.string().c_str(), mode)) {}
  ~PngFile() {
    if (fp) std::fclose(fp);
  }
  PngFile(const PngFile&) = delete;
  PngFile& operator=(const PngFile&) = delete;
};

}  // namespace detail

inline void write_gray16_png(const std::filesystem::path& path,
                             const DepthMap& map, double meters_per_unit) {
  map.validate();
  if (!(meters_per_unit > 0.0))
    throw ValidationError("png scale must be positive");

  std::vector<std::uint16_t> pixels(map.values.size(), 0);
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    const float v = map.values[i];
    if (!std::isfinite(v)) continue;
    const double q = std::llround(v / meters_per_unit);
    pixels[i] = static_cast<std::uint16_t>(std::clamp(q, 1.0, 65535.0));
  }
  std::vector<png_bytep> rows(map.height);
  for (int r = 0; r < map.height; ++r) {
    rows[r] = reinterpret_cast<png_bytep>(pixels.data() +
                                          std::size_t(r) * map.width);
  }

  detail::PngFile file(path, "wb");
  if (!file.fp) throw FormatError("cannot open for writing: " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    throw FormatError("png write failed: " + path.string());
  }
  png_init_io(png, file.fp);
  png_set_IHDR(png, info, map.width, map.height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);  // pixel buffer is native little-endian
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline DepthMap read_gray16_png(const std::filesystem::path& path,
                                double meters_per_unit) {
  if (!(meters_per_unit > 0.0))
    throw ValidationError("png scale must be positive");
  detail::PngFile file(path, "rb");
  if (!file.fp) throw FormatError("cannot open png: " + path.string());
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    throw FormatError("png read failed: " + path.string());
  }
  png_init_io(png, file.fp);
  png_read_png(png, info, PNG_TRANSFORM_SWAP_ENDIAN, nullptr);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth != 16 || color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("expected 16-bit grayscale png: " + path.string());
  }
  png_bytepp rows = png_get_rows(png, info);
  DepthMap map(w, h);
  for (int r = 0; r < h; ++r) {
    const auto* row = reinterpret_cast<const std::uint16_t*>(rows[r]);
    for (int c = 0; c < w; ++c) {
      if (row[c] != 0)
        map.at(r, c) = static_cast<float>(row[c] * meters_per_unit);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return map;
}

inline GrayImage read_guide_png(const std::filesystem::path& path) {
  detail::PngFile file(path, "rb");
  if (!file.fp) throw FormatError("cannot open png: " + path.string());
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    throw FormatError("png read failed: " + path.string());
  }
  png_init_io(png, file.fp);
  png_read_png(png, info,
               PNG_TRANSFORM_SWAP_ENDIAN | PNG_TRANSFORM_STRIP_ALPHA |
                   PNG_TRANSFORM_EXPAND,
               nullptr);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  if ((depth != 8 && depth != 16) || (channels != 1 && channels != 3)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported guide png layout: " + path.string());
  }
  png_bytepp rows = png_get_rows(png, info);
  GrayImage img;
  img.width = w;
  img.height = h;
  img.values.resize(static_cast<std::size_t>(w) * h);
  const double maxval = depth == 8 ? 255.0 : 65535.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double samples[3] = {0, 0, 0};
      for (int ch = 0; ch < channels; ++ch) {
        samples[ch] = depth == 8
                          ? rows[r][c * channels + ch]
                          : reinterpret_cast<const std::uint16_t*>(
                                rows[r])[c * channels + ch];
      }
      const double luma =
          channels == 1
              ? samples[0]
              : 0.299 * samples[0] + 0.587 * samples[1] + 0.114 * samples[2];
      img.values[std::size_t(r) * w + c] = static_cast<float>(luma / maxval);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void write_rgb8_png(const std::filesystem::path& path, int width,
                           int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    throw ValidationError("rgb buffer size mismatch");
  std::vector<png_bytep> rows(height);
  for (int r = 0; r < height; ++r) {
    rows[r] = const_cast<png_bytep>(rgb.data() + std::size_t(r) * width * 3);
  }
  detail::PngFile file(path, "wb");
  if (!file.fp) throw FormatError("cannot open for writing: " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    throw FormatError("png write failed: " + path.string());
  }
  png_init_io(png, file.fp);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace mff
