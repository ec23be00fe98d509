#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ssgc {

enum class ErrorCode {
  MalformedHeader,
  SizeMismatch,
  NonFiniteValue,
  DimensionMismatch,
  RankDeficient,
  TooManySuperpixels,
  DisconnectedSuperpixel,
  EmptySuperpixel,
  WeightOutOfRange,
  KernelTooLarge,
  ShapeMismatch,
  SpectralLengthUnderflow,
  MissingGradient,
  NonDeterministicFunction,
  NotNormalized,
  NoLabeledEdges,
  EmptyCluster,
  TooManyClusters,
  NoLabeledPixels,
  MissingGroundTruth,
  InvalidConfig,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::TooManySuperpixels: return "TooManySuperpixels";
    case ErrorCode::DisconnectedSuperpixel: return "DisconnectedSuperpixel";
    case ErrorCode::EmptySuperpixel: return "EmptySuperpixel";
    case ErrorCode::WeightOutOfRange: return "WeightOutOfRange";
    case ErrorCode::KernelTooLarge: return "KernelTooLarge";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SpectralLengthUnderflow: return "SpectralLengthUnderflow";
    case ErrorCode::MissingGradient: return "MissingGradient";
    case ErrorCode::NonDeterministicFunction: return "NonDeterministicFunction";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NoLabeledEdges: return "NoLabeledEdges";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::TooManyClusters: return "TooManyClusters";
    case ErrorCode::NoLabeledPixels: return "NoLabeledPixels";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Dense row-major matrix of doubles. Plain data holder used outside the
// differentiable path (features, embeddings, PCA).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw Error(ErrorCode::SizeMismatch, "matrix buffer does not match shape");
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Rescales values into [0,1]. A degenerate range maps everything to 0.5.
inline std::vector<double> min_max_normalize(std::span<const double> v) {
  std::vector<double> out(v.size(), 0.5);
  if (v.empty()) return out;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / range;
  return out;
}

inline void warn(std::string_view msg) { std::cerr << "warning: " << msg << '\n'; }

}  // namespace ssgc
