#pragma once

#include <png.h>

#include <array>
#include <cstdio>
#include <memory>

#include "ssgc/common.hpp"

namespace ssgc {

// 16-entry palette; label 0 (unlabeled) is black and ids wrap past 15.
inline std::array<std::uint8_t, 3> palette_color(int label) {
  static constexpr std::uint8_t table[16][3] = {
      {0, 0, 0},       {230, 25, 75},  {60, 180, 75},  {255, 225, 25}, {0, 130, 200},  {245, 130, 48},
      {145, 30, 180},  {70, 240, 240}, {240, 50, 230}, {210, 245, 60}, {250, 190, 212}, {0, 128, 128},
      {220, 190, 255}, {170, 110, 40}, {128, 0, 0},    {170, 255, 195}};
  const int i = label <= 0 ? 0 : 1 + (label - 1) % 15;
  return {table[i][0], table[i][1], table[i][2]};
}

// Writes a label raster as an RGB PNG.
inline void write_label_png(const std::string& path, const std::vector<int>& labels, std::size_t height,
                            std::size_t width) {
  if (labels.size() != height * width) throw Error(ErrorCode::SizeMismatch, "label count does not match image size");
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw Error(ErrorCode::Io, "cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng initialization failed");
  }
  std::vector<png_byte> row(width * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng failed writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const auto c = palette_color(labels[y * width + x]);
      std::copy(c.begin(), c.end(), row.begin() + static_cast<long>(x * 3));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace ssgc
