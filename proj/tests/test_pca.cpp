#include <gtest/gtest.h>

#include "ssgc/hsi_io.hpp"
#include "ssgc/pca.hpp"
#include "test_util.hpp"

using namespace ssgc;

namespace {

// Population covariance, computed directly.
std::vector<std::vector<double>> covariance(const Matrix& x) {
  const std::size_t n = x.rows, b = x.cols;
  std::vector<double> mean(b, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < b; ++j) mean[j] += x(i, j) / static_cast<double>(n);
  std::vector<std::vector<double>> c(b, std::vector<double>(b, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < b; ++j)
      for (std::size_t k = 0; k < b; ++k) c[j][k] += (x(i, j) - mean[j]) * (x(i, k) - mean[k]) / static_cast<double>(n);
  return c;
}

// Power iteration with deflation: top-d eigenpairs.
std::vector<std::pair<double, std::vector<double>>> power_eigs(std::vector<std::vector<double>> c, std::size_t d) {
  const std::size_t b = c.size();
  std::vector<std::pair<double, std::vector<double>>> out;
  for (std::size_t k = 0; k < d; ++k) {
    std::vector<double> v(b);
    for (std::size_t i = 0; i < b; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i);
    double lambda = 0.0;
    for (int it = 0; it < 20000; ++it) {
      std::vector<double> w(b, 0.0);
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) w[i] += c[i][j] * v[j];
      double n = 0.0;
      for (double x : w) n += x * x;
      n = std::sqrt(n);
      for (auto& x : w) x /= n;
      double delta = 0.0;
      for (std::size_t i = 0; i < b; ++i) delta = std::max(delta, std::abs(w[i] - v[i]));
      v = w;
      lambda = n;
      if (delta < 1e-15) break;
    }
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) c[i][j] -= lambda * v[i] * v[j];
    out.emplace_back(lambda, v);
  }
  return out;
}

}  // namespace

TEST(Pca, RankOneDataHasFullRatio) {
  Matrix x(10, 3);
  for (std::size_t i = 0; i < 10; ++i) {
    const double t = static_cast<double>(i) - 4.0;
    x(i, 0) = 2.0 * t;
    x(i, 1) = -t;
    x(i, 2) = 0.5 * t;
  }
  const auto m = fit_pca(x, 1);
  EXPECT_NEAR(m.explained_variance_ratio(0), 1.0, 1e-12);
}

TEST(Pca, MatchesPowerIterationOracle) {
  std::mt19937_64 rng(7);
  // Distinct spectrum so eigenvectors are well separated.
  Matrix x = testutil::random_matrix(100, 6, rng);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < 6; ++j) x(i, j) *= static_cast<double>(6 - j);
  const auto model = fit_pca(x, 3);
  const auto oracle = power_eigs(covariance(x), 3);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(model.explained_variance[k], oracle[k].first, 1e-8);
    double sign = 0.0;
    for (std::size_t j = 0; j < 6; ++j) sign += model.components(j, k) * oracle[k].second[j];
    sign = sign < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(model.components(j, k), sign * oracle[k].second[j], 1e-6);
  }
}

TEST(Pca, SignConventionAndOrthonormality) {
  std::mt19937_64 rng(8);
  const Matrix x = testutil::random_matrix(50, 5, rng);
  const auto m = fit_pca(x, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    std::size_t arg = 0;
    for (std::size_t j = 0; j < 5; ++j)
      if (std::abs(m.components(j, k)) > std::abs(m.components(arg, k))) arg = j;
    EXPECT_GT(m.components(arg, k), 0.0);
    for (std::size_t l = 0; l < 4; ++l) {
      double d = 0.0;
      for (std::size_t j = 0; j < 5; ++j) d += m.components(j, k) * m.components(j, l);
      EXPECT_NEAR(d, k == l ? 1.0 : 0.0, 1e-8);
    }
    if (k > 0) EXPECT_LE(m.explained_variance[k], m.explained_variance[k - 1]);
  }
}

TEST(Pca, ProjectionCovarianceIsDiagonal) {
  std::mt19937_64 rng(9);
  const Matrix x = testutil::random_matrix(200, 5, rng);
  const auto m = fit_pca(x, 5);
  const auto c = covariance(project(m, x));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      if (i != j) EXPECT_LT(std::abs(c[i][j]), 1e-6);
}

TEST(Pca, FullBasisPreservesDistancesAndReconstructs) {
  std::mt19937_64 rng(10);
  const Matrix x = testutil::random_matrix(30, 4, rng);
  const auto m = fit_pca(x, 4);
  const Matrix y = project(m, x);
  for (std::size_t a = 0; a < 30; ++a)
    for (std::size_t b = a + 1; b < 30; ++b) {
      double dx = 0.0, dy = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        dx += (x(a, j) - x(b, j)) * (x(a, j) - x(b, j));
        dy += (y(a, j) - y(b, j)) * (y(a, j) - y(b, j));
      }
      EXPECT_NEAR(std::sqrt(dx), std::sqrt(dy), 1e-8);
    }
  EXPECT_LT(testutil::max_abs_diff(reconstruct(m, y).data, x.data), 1e-8);
}

TEST(Pca, MeanProjectsToZeroAndComponentsToBasis) {
  std::mt19937_64 rng(11);
  const Matrix x = testutil::random_matrix(40, 3, rng);
  const auto m = fit_pca(x, 3);
  Matrix mean(1, 3, m.mean);
  for (double v : project(m, mean).data) EXPECT_NEAR(v, 0.0, 1e-12);
  // mean + component k projects to e_k.
  Matrix shifted(3, 3);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 3; ++j) shifted(k, j) = m.mean[j] + m.components(j, k);
  const Matrix p = project(m, shifted);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(p(k, j), k == j ? 1.0 : 0.0, 1e-10);
}

TEST(Pca, Errors) {
  Matrix zero(5, 3, 0.0);
  try {
    fit_pca(zero, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
  }
  std::mt19937_64 rng(1);
  const auto m = fit_pca(testutil::random_matrix(10, 3, rng), 2);
  try {
    project(m, Matrix(2, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(FirstPrincipalGray, ConstantCubeIsHalf) {
  const HsiCube c(3, 3, 2, std::vector<double>(18, 0.0));
  for (double v : first_principal_gray(c).data) EXPECT_EQ(v, 0.5);
}

TEST(FirstPrincipalGray, RankOneIsProportionalToFactor) {
  std::vector<double> data;
  std::vector<double> factor;
  for (int p = 0; p < 12; ++p) {
    const double t = std::sin(0.7 * p);
    factor.push_back(t);
    for (double s : {1.0, -2.0, 0.5}) data.push_back(s * t);
  }
  const Matrix g = first_principal_gray(HsiCube(3, 4, 3, data));
  const auto ref = min_max_normalize(factor);
  // Component sign puts the -2 loading positive, so the gray image is the
  // min-max of -factor.
  for (std::size_t p = 0; p < 12; ++p) EXPECT_NEAR(g.data[p], 1.0 - ref[p], 1e-10);
}

TEST(FirstPrincipalGray, MatchesProjectThenRescale) {
  std::mt19937_64 rng(12);
  const Matrix x = testutil::random_matrix(64, 3, rng);
  const HsiCube c(8, 8, 3, x.data);
  const auto m = fit_pca(x, 1);
  const auto ref = min_max_normalize(project(m, x).data);
  EXPECT_LT(testutil::max_abs_diff(first_principal_gray(c).data, ref), 1e-12);
}
