#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ssgc/binio.hpp"
#include "ssgc/common.hpp"

namespace ssgc {

enum class Dtype { F32, F64 };

// Hyperspectral cube, row-major (y, x, band).
struct HsiCube {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  std::vector<double> data;

  HsiCube() = default;
  HsiCube(std::size_t h, std::size_t w, std::size_t b, std::vector<double> values)
      : height(h), width(w), bands(b), data(std::move(values)) {
    if (data.size() != h * w * b) throw Error(ErrorCode::SizeMismatch, "cube buffer does not match dimensions");
    if (!all_finite(data)) throw Error(ErrorCode::NonFiniteValue, "cube contains NaN/Inf");
  }

  std::size_t pixels() const { return height * width; }
  double at(std::size_t y, std::size_t x, std::size_t b) const { return data[(y * width + x) * bands + b]; }
  std::span<const double> spectrum(std::size_t pixel) const { return {data.data() + pixel * bands, bands}; }

  // Pixels as an N x bands matrix.
  Matrix pixel_matrix() const { return Matrix(pixels(), bands, data); }

  bool operator==(const HsiCube&) const = default;
};

// 0 = unlabeled, 1..classes = class id.
struct LabelRaster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;
  std::vector<int> labels;

  std::size_t pixels() const { return height * width; }
  bool operator==(const LabelRaster&) const = default;
};

namespace detail {

inline const char* dtype_name(Dtype d) { return d == Dtype::F32 ? "f32" : "f64"; }

}  // namespace detail

inline void write_cube(const std::string& path, const HsiCube& cube, Dtype dtype = Dtype::F32) {
  binio::json h = {{"height", cube.height}, {"width", cube.width}, {"bands", cube.bands},
                   {"dtype", detail::dtype_name(dtype)}};
  std::string payload;
  payload.reserve(cube.data.size() * (dtype == Dtype::F32 ? 4 : 8));
  for (double v : cube.data) {
    if (dtype == Dtype::F32)
      binio::append_le(payload, static_cast<float>(v));
    else
      binio::append_le(payload, v);
  }
  binio::write_framed(path, h, payload);
}

inline HsiCube load_cube(const std::string& path) {
  auto f = binio::read_framed(path);
  const auto height = binio::header_dim(f.header, "height", path);
  const auto width = binio::header_dim(f.header, "width", path);
  const auto bands = binio::header_dim(f.header, "bands", path);
  const std::string dtype = f.header.value("dtype", std::string("f32"));
  std::size_t elem = 0;
  if (dtype == "f32")
    elem = 4;
  else if (dtype == "f64")
    elem = 8;
  else
    throw Error(ErrorCode::MalformedHeader, path + ": unsupported dtype '" + dtype + "'");

  const std::size_t count = height * width * bands;
  if (f.payload.size() != count * elem)
    throw Error(ErrorCode::SizeMismatch, path + ": expected " + std::to_string(count) + " values, payload holds " +
                                             std::to_string(f.payload.size() / elem) + " (" +
                                             std::to_string(f.payload.size()) + " bytes)");
  std::vector<double> data(count);
  const char* p = f.payload.data();
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = elem == 4 ? static_cast<double>(binio::read_le<float>(p + i * 4)) : binio::read_le<double>(p + i * 8);
    if (!std::isfinite(data[i])) throw Error(ErrorCode::NonFiniteValue, path + ": value " + std::to_string(i));
  }
  return HsiCube(height, width, bands, std::move(data));
}

inline void write_labels(const std::string& path, const LabelRaster& raster) {
  binio::json h = {{"height", raster.height}, {"width", raster.width}, {"classes", raster.classes}};
  std::string payload;
  payload.reserve(raster.labels.size() * 2);
  for (int v : raster.labels) {
    if (v < 0 || v > 65535) throw Error(ErrorCode::SizeMismatch, "label out of u16 range");
    binio::append_le(payload, static_cast<std::uint16_t>(v));
  }
  binio::write_framed(path, h, payload);
}

inline LabelRaster load_labels(const std::string& path) {
  auto f = binio::read_framed(path);
  LabelRaster r;
  r.height = binio::header_dim(f.header, "height", path);
  r.width = binio::header_dim(f.header, "width", path);
  r.classes = binio::header_dim(f.header, "classes", path);
  const std::size_t n = r.height * r.width;
  if (f.payload.size() != n * 2)
    throw Error(ErrorCode::SizeMismatch, path + ": expected " + std::to_string(n) + " labels");
  r.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.labels[i] = binio::read_le<std::uint16_t>(f.payload.data() + i * 2);
    if (static_cast<std::size_t>(r.labels[i]) > r.classes)
      throw Error(ErrorCode::MalformedHeader, path + ": label exceeds declared class count");
  }
  return r;
}

// Per band: subtract the mean, divide by the population standard deviation.
// Constant bands become all-zero.
inline HsiCube standardize_bands(const HsiCube& cube) {
  const std::size_t n = cube.pixels();
  const std::size_t b = cube.bands;
  std::vector<double> out(cube.data.size());
  for (std::size_t band = 0; band < b; ++band) {
    double mean = 0.0;
    for (std::size_t p = 0; p < n; ++p) mean += cube.data[p * b + band];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double d = cube.data[p * b + band] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    // Relative threshold: a band whose spread is at rounding level is constant.
    const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
    for (std::size_t p = 0; p < n; ++p)
      out[p * b + band] = constant ? 0.0 : (cube.data[p * b + band] - mean) / sd;
  }
  return HsiCube(cube.height, cube.width, b, std::move(out));
}

}  // namespace ssgc
