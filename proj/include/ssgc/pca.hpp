#pragma once

#include <Eigen/Dense>

#include "ssgc/common.hpp"
#include "ssgc/hsi_io.hpp"

namespace ssgc {

struct PcaModel {
  std::vector<double> mean;                 // bands
  Matrix components;                        // bands x d, orthonormal columns
  std::vector<double> explained_variance;  // d, non-increasing
  double total_variance = 0.0;

  std::size_t bands() const { return components.rows; }
  std::size_t dims() const { return components.cols; }

  double explained_variance_ratio(std::size_t k) const {
    return total_variance > 0.0 ? explained_variance[k] / total_variance : 0.0;
  }
};

// Top-d eigenvectors of the population covariance, by descending eigenvalue.
// Each component is signed so that its largest-magnitude entry is positive.
inline PcaModel fit_pca(const Matrix& pixels, std::size_t d) {
  const std::size_t n = pixels.rows;
  const std::size_t b = pixels.cols;
  if (d < 1 || d > b) throw Error(ErrorCode::DimensionMismatch, "PCA needs 1 <= d <= bands");
  if (n < d) throw Error(ErrorCode::DimensionMismatch, "PCA needs at least d samples");

  PcaModel model;
  model.mean.assign(b, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < b; ++j) model.mean[j] += pixels(i, j);
  for (auto& m : model.mean) m /= static_cast<double>(n);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b));
  std::vector<double> centered(b);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < b; ++j) centered[j] = pixels(i, j) - model.mean[j];
    for (std::size_t r = 0; r < b; ++r)
      for (std::size_t c = r; c < b; ++c) cov(r, c) += centered[r] * centered[c];
  }
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t c = r; c < b; ++c) {
      cov(r, c) /= static_cast<double>(n);
      cov(c, r) = cov(r, c);
    }
  if (cov.cwiseAbs().maxCoeff() == 0.0) throw Error(ErrorCode::RankDeficient, "covariance is all-zero");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::RankDeficient, "eigendecomposition failed");
  const auto& evals = solver.eigenvalues();  // ascending
  const auto& evecs = solver.eigenvectors();

  model.total_variance = cov.trace();
  model.components = Matrix(b, d);
  model.explained_variance.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    const auto col = static_cast<Eigen::Index>(b - 1 - k);
    model.explained_variance[k] = std::max(0.0, evals(col));
    std::size_t arg = 0;
    for (std::size_t j = 1; j < b; ++j)
      if (std::abs(evecs(static_cast<Eigen::Index>(j), col)) > std::abs(evecs(static_cast<Eigen::Index>(arg), col)))
        arg = j;
    const double sign = evecs(static_cast<Eigen::Index>(arg), col) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < b; ++j) model.components(j, k) = sign * evecs(static_cast<Eigen::Index>(j), col);
  }
  return model;
}

inline Matrix project(const PcaModel& model, const Matrix& pixels) {
  if (pixels.cols != model.bands())
    throw Error(ErrorCode::DimensionMismatch, "pixel width " + std::to_string(pixels.cols) +
                                                  " != PCA bands " + std::to_string(model.bands()));
  const std::size_t d = model.dims();
  Matrix out(pixels.rows, d);
  std::vector<double> centered(pixels.cols);
  for (std::size_t i = 0; i < pixels.rows; ++i) {
    for (std::size_t j = 0; j < pixels.cols; ++j) centered[j] = pixels(i, j) - model.mean[j];
    for (std::size_t j = 0; j < pixels.cols; ++j) {
      const double c = centered[j];
      for (std::size_t k = 0; k < d; ++k) out(i, k) += c * model.components(j, k);
    }
  }
  return out;
}

inline Matrix reconstruct(const PcaModel& model, const Matrix& scores) {
  if (scores.cols != model.dims()) throw Error(ErrorCode::DimensionMismatch, "score width != PCA dims");
  Matrix out(scores.rows, model.bands());
  for (std::size_t i = 0; i < scores.rows; ++i)
    for (std::size_t j = 0; j < model.bands(); ++j) {
      double v = model.mean[j];
      for (std::size_t k = 0; k < model.dims(); ++k) v += scores(i, k) * model.components(j, k);
      out(i, j) = v;
    }
  return out;
}

// First principal component scores min-max rescaled into [0,1], as a
// height x width image. A constant cube yields 0.5 everywhere.
inline Matrix first_principal_gray(const HsiCube& cube) {
  const Matrix pixels = cube.pixel_matrix();
  std::vector<double> scores(cube.pixels(), 0.0);
  try {
    const auto model = fit_pca(pixels, 1);
    const Matrix s = project(model, pixels);
    scores = s.data;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::RankDeficient) throw;
  }
  return Matrix(cube.height, cube.width, min_max_normalize(scores));
}

}  // namespace ssgc
