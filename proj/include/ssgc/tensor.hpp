#pragma once

#include <functional>
#include <numeric>

#include "ssgc/common.hpp"

namespace ssgc {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0) : shape(std::move(s)), data(count(shape), fill) {}
  Tensor(std::vector<std::size_t> s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != count(shape)) throw Error(ErrorCode::ShapeMismatch, "tensor buffer does not match shape");
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  static Tensor from(const Matrix& m) { return Tensor({m.rows, m.cols}, m.data); }
  Matrix to_matrix() const {
    if (shape.size() != 2) throw Error(ErrorCode::ShapeMismatch, "to_matrix needs a 2-D tensor");
    return Matrix(shape[0], shape[1], data);
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  // Leading dimension and the flattened remainder.
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t row_size() const { return shape.empty() ? 1 : size() / std::max<std::size_t>(shape[0], 1); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool operator==(const Tensor&) const = default;
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out + ")";
}

}  // namespace ssgc
