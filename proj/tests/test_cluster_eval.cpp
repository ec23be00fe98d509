#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <set>

#include "ssgc/cluster_eval.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ssgc;

using namespace oracles;

TEST(Hungarian, Examples) {
  EXPECT_EQ(hungarian_map(from_counts(3, 3, {4, 0, 0, 0, 7, 0, 0, 0, 2})), (std::vector<int>{0, 1, 2}));
  const auto cm = from_counts(2, 2, {5, 1, 2, 4});
  EXPECT_EQ(hungarian_map(cm), (std::vector<int>{0, 1}));
  EXPECT_DOUBLE_EQ(compute_metrics(cm).acc, 0.75);
}

TEST(Hungarian, MatchesBruteForceOn500Matrices) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> kd(1, 6);
  std::uniform_int_distribution<int> small(0, 4), big(0, 60);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t kp = kd(rng), kt = trial % 3 == 0 ? kp : kd(rng);
    std::vector<long long> counts(kp * kt);
    // Small ranges produce many ties, exercising the tie-break.
    for (auto& c : counts) c = trial % 2 ? small(rng) : big(rng);
    const auto cm = from_counts(kp, kt, counts);
    const auto got = hungarian_map(cm);
    ASSERT_EQ(got, brute_force_map(cm)) << "trial " << trial;

    // Never worse than greedy matching.
    std::vector<char> ru(kp, 0), cu(kt, 0);
    long long greedy = 0;
    for (std::size_t s = 0; s < std::min(kp, kt); ++s) {
      long long bv = -1;
      std::size_t br = 0, bc = 0;
      for (std::size_t r = 0; r < kp; ++r)
        for (std::size_t c = 0; c < kt; ++c)
          if (!ru[r] && !cu[c] && cm.at(r, c) > bv) bv = cm.at(r, c), br = r, bc = c;
      ru[br] = cu[bc] = 1;
      greedy += bv;
    }
    long long h = 0;
    for (std::size_t r = 0; r < kp; ++r)
      if (static_cast<std::size_t>(got[r]) < kt) h += cm.at(r, static_cast<std::size_t>(got[r]));
    EXPECT_GE(h, greedy);
  }
}

TEST(Metrics, PerfectClustering) {
  const LabelRaster gt{2, 3, 3, {1, 2, 3, 3, 2, 1}};
  const std::vector<int> pred = {7, 4, 0, 0, 4, 7};
  const auto m = compute_metrics(pred, gt);
  for (double v : {m.acc, m.kappa, m.nmi, m.ari, m.precision, m.recall, m.f1, m.purity}) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Metrics, SingleClusterOnBalancedPair) {
  const LabelRaster gt{1, 6, 2, {1, 1, 1, 2, 2, 2}};
  const auto m = compute_metrics(std::vector<int>(6, 0), gt);
  EXPECT_DOUBLE_EQ(m.acc, 0.5);
  EXPECT_NEAR(m.nmi, 0.0, 1e-15);
  EXPECT_NEAR(m.ari, 0.0, 1e-15);
  EXPECT_NEAR(m.kappa, 0.0, 1e-15);
}

TEST(Metrics, MatchCombinatorialOracles) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> np(40, 120), kp(1, 5), kt(1, 5);
    const int n = np(rng), k1 = kp(rng), k2 = kt(rng);
    std::uniform_int_distribution<int> dp(0, k1 - 1), dt(0, k2);  // gt 0 = unlabeled
    std::vector<int> pred(n), gt(n);
    for (int i = 0; i < n; ++i) {
      gt[i] = dt(rng);
      // Correlated predictions so the matching is non-trivial.
      pred[i] = (gt[i] > 0 && rng() % 3 == 0) ? (gt[i] - 1) % k1 : dp(rng);
    }
    if (std::none_of(gt.begin(), gt.end(), [](int g) { return g > 0; })) gt[0] = 1;
    const auto m = compute_metrics(confusion(pred, gt));
    const auto o = oracle(pred, gt);
    EXPECT_NEAR(m.acc, o.acc, 1e-12);
    EXPECT_NEAR(m.ari, std::clamp(o.ari, -1.0, 1.0), 1e-10) << trial;
    EXPECT_NEAR(m.nmi, std::clamp(o.nmi, 0.0, 1.0), 1e-10) << trial;
    EXPECT_NEAR(m.kappa, std::clamp(o.kappa, -1.0, 1.0), 1e-10) << trial;
    for (double v : {m.acc, m.nmi, m.precision, m.recall, m.f1, m.purity}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Metrics, PermutationInvariance) {
  std::mt19937_64 rng(3);
  std::vector<int> gt(300), pred(300);
  for (int i = 0; i < 300; ++i) {
    gt[i] = 1 + i % 4;
    pred[i] = rng() % 5 ? gt[i] - 1 : static_cast<int>(rng() % 4);
  }
  const auto base = compute_metrics(confusion(pred, gt));
  std::vector<int> relabel = {2, 0, 3, 1};
  for (auto& p : pred) p = relabel[static_cast<std::size_t>(p)] + 10;
  const auto m = compute_metrics(confusion(pred, gt));
  EXPECT_NEAR(m.acc, base.acc, 1e-15);
  EXPECT_NEAR(m.kappa, base.kappa, 1e-15);
  EXPECT_NEAR(m.nmi, base.nmi, 1e-15);
  EXPECT_NEAR(m.ari, base.ari, 1e-15);
  EXPECT_NEAR(m.f1, base.f1, 1e-15);
  EXPECT_NEAR(m.purity, base.purity, 1e-15);
}

TEST(Metrics, Errors) {
  try {
    confusion({1, 2}, {0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoLabeledPixels);
  }
  EXPECT_THROW(confusion({1}, {1, 2}), Error);
}

TEST(SphericalKMeans, Antipodal) {
  const Matrix z(2, 2, {1, 0, -1, 0});
  const auto r = spherical_kmeans(z, 2, 0);
  EXPECT_NE(r.assignment[0], r.assignment[1]);
  EXPECT_NEAR(r.objective, 2.0, 1e-15);
}

TEST(SphericalKMeans, IdenticalPoints) {
  const Matrix z(5, 3, std::vector<double>{0.6, 0.0, 0.8, 0.6, 0.0, 0.8, 0.6, 0.0, 0.8, 0.6, 0.0, 0.8, 0.6, 0.0, 0.8});
  const auto r = spherical_kmeans(z, 1, 0);
  EXPECT_NEAR(r.centroids(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(r.centroids(0, 2), 0.8, 1e-15);
  // K=2 on identical points still leaves no cluster empty.
  const auto r2 = spherical_kmeans(z, 2, 0);
  EXPECT_EQ(std::set<int>(r2.assignment.begin(), r2.assignment.end()).size(), 2u);
}

TEST(SphericalKMeans, MonotoneOn100Instances) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 20 + rng() % 80, f = 2 + rng() % 6, k = 1 + rng() % 6;
    const Matrix z = testutil::unit_rows(testutil::random_matrix(m, f, rng));
    const auto r = spherical_kmeans(z, k, rng(), 100, 0.0);
    for (std::size_t i = 1; i < r.history.size(); ++i) ASSERT_GE(r.history[i], r.history[i - 1] - 1e-12) << trial;
    EXPECT_LE(r.iterations, 100);
    std::vector<int> counts(k, 0);
    for (int a : r.assignment) ++counts[static_cast<std::size_t>(a)];
    for (int c : counts) EXPECT_GT(c, 0);
    for (std::size_t c = 0; c < k; ++c) EXPECT_NEAR(norm2(r.centroids.row(c)), 1.0, 1e-12);
  }
}

TEST(SphericalKMeans, BumpsMatchMultiRestartOracle) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double centers[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  Matrix z(200, 3);
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t j = 0; j < 3; ++j) z(i, j) = centers[i % 3][j] + 0.15 * n01(rng);
  z = testutil::unit_rows(z);
  // Oracle: best of 200 independent single runs.
  double oracle = -1e300;
  for (int s = 0; s < 200; ++s) oracle = std::max(oracle, spherical_kmeans(z, 3, 1000 + s).objective);
  const auto best = spherical_kmeans_best(z, 3, 9, 20);
  EXPECT_NEAR(best.objective, oracle, 1e-9);
  // And it recovers the generating bumps.
  const LabelRaster gt{1, 200, 3, [] {
    std::vector<int> v(200);
    for (int i = 0; i < 200; ++i) v[i] = i % 3 + 1;
    return v;
  }()};
  EXPECT_GT(compute_metrics(best.assignment, gt).acc, 0.99);
}

TEST(SphericalKMeans, TooManyClusters) {
  try {
    spherical_kmeans(Matrix(2, 2, {1, 0, 0, 1}), 3, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooManyClusters);
  }
}

TEST(EuclideanKMeans, SeparatesBlobs) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n01(0.0, 0.1);
  Matrix x(90, 2);
  std::vector<int> gt(90);
  for (std::size_t i = 0; i < 90; ++i) {
    gt[i] = static_cast<int>(i % 3) + 1;
    x(i, 0) = 3.0 * static_cast<double>(i % 3) + n01(rng);
    x(i, 1) = n01(rng);
  }
  const auto r = kmeans(x, 3, 1);
  EXPECT_DOUBLE_EQ(compute_metrics(r.assignment, LabelRaster{1, 90, 3, gt}).acc, 1.0);
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_GE(r.history[i], r.history[i - 1] - 1e-12);
}

TEST(LabelsToPixels, Transfer) {
  Segmentation one{2, 2, 1, {0, 0, 0, 0}};
  EXPECT_EQ(labels_to_pixels({3}, one), (std::vector<int>{3, 3, 3, 3}));
  Segmentation id{1, 3, 3, {0, 1, 2}};
  EXPECT_EQ(labels_to_pixels({5, 6, 7}, id), (std::vector<int>{5, 6, 7}));

  std::mt19937_64 rng(7);
  Segmentation s{6, 6, 5, {}};
  for (int p = 0; p < 36; ++p) s.assignment.push_back(p < 5 ? p : static_cast<std::uint32_t>(rng() % 5));
  const std::vector<int> sp = {0, 1, 0, 2, 1};
  const auto px = labels_to_pixels(sp, s);
  std::map<int, std::size_t> expect, got;
  for (auto a : s.assignment) ++expect[sp[a]];
  for (int v : px) ++got[v];
  EXPECT_EQ(got, expect);
}
