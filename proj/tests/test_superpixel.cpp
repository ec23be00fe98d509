#include <gtest/gtest.h>

#include <queue>

#include "ssgc/superpixel.hpp"
#include "test_util.hpp"

using namespace ssgc;

namespace {

// Independent 4-connectivity check: BFS inside each id from its first pixel.
bool all_connected(const Segmentation& s) {
  std::vector<char> seen(s.pixels(), 0);
  std::vector<char> started(s.count, 0);
  for (std::size_t p0 = 0; p0 < s.pixels(); ++p0) {
    const auto id = s.assignment[p0];
    if (started[id]) continue;
    started[id] = 1;
    std::queue<std::size_t> q;
    q.push(p0);
    seen[p0] = 1;
    while (!q.empty()) {
      const std::size_t p = q.front();
      q.pop();
      const std::size_t y = p / s.width, x = p % s.width;
      const long dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const long ny = static_cast<long>(y) + dy[k], nx = static_cast<long>(x) + dx[k];
        if (ny < 0 || nx < 0 || ny >= static_cast<long>(s.height) || nx >= static_cast<long>(s.width)) continue;
        const std::size_t np = static_cast<std::size_t>(ny) * s.width + static_cast<std::size_t>(nx);
        if (!seen[np] && s.assignment[np] == id) {
          seen[np] = 1;
          q.push(np);
        }
      }
    }
  }
  for (std::size_t p = 0; p < s.pixels(); ++p)
    if (!seen[p]) return false;
  return true;
}

void expect_valid(const Segmentation& s, std::size_t m) {
  ASSERT_EQ(s.count, m);
  ASSERT_EQ(s.assignment.size(), s.pixels());
  std::vector<std::size_t> sizes(m, 0);
  for (auto a : s.assignment) {
    ASSERT_LT(a, m);
    ++sizes[a];
  }
  for (auto c : sizes) EXPECT_GT(c, 0u);
  EXPECT_TRUE(all_connected(s));
}

Matrix smooth_gray(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = u(rng) * 0.5, b = u(rng) * 0.5, c = u(rng);
  Matrix g(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      g(y, x) = 0.5 + 0.4 * std::sin(a * static_cast<double>(y) + c) * std::cos(b * static_cast<double>(x)) +
                0.05 * u(rng);
  return g;
}

Segmentation raster(std::size_t h, std::size_t w, std::vector<std::uint32_t> ids) {
  Segmentation s;
  s.height = h;
  s.width = w;
  s.assignment = std::move(ids);
  s.count = *std::max_element(s.assignment.begin(), s.assignment.end()) + 1;
  return s;
}

}  // namespace

TEST(Segment, OnePixelPerSuperpixel) {
  const Matrix g = smooth_gray(6, 5, 1);
  const auto s = segment(g, 30, 0);
  expect_valid(s, 30);
}

TEST(Segment, SingleRegion) {
  const auto s = segment(smooth_gray(9, 7, 2), 1, 0);
  expect_valid(s, 1);
}

TEST(Segment, TooMany) {
  try {
    segment(smooth_gray(3, 3, 3), 10, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooManySuperpixels);
  }
}

TEST(Segment, TwoToneHalves) {
  Matrix g(64, 64);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) g(y, x) = x < 32 ? 0.0 : 1.0;
  const auto s = segment(g, 2, 5);
  expect_valid(s, 2);
  // Every region is pure, so every true boundary pixel pair is a superpixel boundary.
  for (std::size_t y = 0; y < 64; ++y) {
    for (std::size_t x = 0; x < 64; ++x) EXPECT_EQ(s.assignment[y * 64 + x], s.assignment[y * 64 + (x < 32 ? 0 : 63)]);
    EXPECT_NE(s.assignment[y * 64 + 31], s.assignment[y * 64 + 32]);
  }
}

TEST(Segment, ExactCountConnectedDeterministic) {
  for (std::size_t m : {2u, 7u, 13u, 40u, 150u, 333u}) {
    const Matrix g = smooth_gray(40, 48, m);
    const auto a = segment(g, m, 11);
    expect_valid(a, m);
    EXPECT_EQ(a, segment(g, m, 11)) << m;
  }
}

TEST(ImportSegmentation, CountsAndRelabels) {
  const auto dir = testutil::scratch_dir("spseg");
  const auto s = raster(1, 3, {0, 1, 2});
  write_segmentation(dir + "/a.spseg", s);
  const auto a = import_segmentation(dir + "/a.spseg");
  EXPECT_EQ(a.seg.count, 3u);
  EXPECT_FALSE(a.relabeled);
  EXPECT_EQ(a.seg, s);

  auto gap = raster(1, 2, {0, 2});
  gap.count = 2;
  write_segmentation(dir + "/b.spseg", gap);
  const auto b = import_segmentation(dir + "/b.spseg");
  EXPECT_TRUE(b.relabeled);
  EXPECT_EQ(b.seg.count, 2u);
  EXPECT_EQ(b.seg.assignment, (std::vector<std::uint32_t>{0, 1}));
}

TEST(ImportSegmentation, RoundTripAndDisconnected) {
  const auto dir = testutil::scratch_dir("spseg_rt");
  const auto s = segment(smooth_gray(20, 20, 4), 17, 3);
  write_segmentation(dir + "/s.spseg", s);
  const auto r = import_segmentation(dir + "/s.spseg", 20, 20);
  EXPECT_EQ(r.seg, s);
  EXPECT_TRUE(r.disconnected.empty());

  write_segmentation(dir + "/d.spseg", raster(1, 3, {0, 1, 0}));
  const auto d = import_segmentation(dir + "/d.spseg");
  EXPECT_EQ(d.disconnected, (std::vector<std::uint32_t>{0}));
  EXPECT_THROW(import_segmentation(dir + "/d.spseg", 2, 3), Error);
}

TEST(MeanFeatures, Examples) {
  const auto s = raster(1, 3, {0, 0, 1});
  const Matrix f(3, 2, {1, 1, 3, 3, 5, -2});
  const Matrix x = mean_features(s, f);
  EXPECT_EQ(x.data, (std::vector<double>{2, 2, 5, -2}));
}

TEST(MeanFeatures, MatchesNaiveOracleAndHull) {
  std::mt19937_64 rng(3);
  const auto s = segment(smooth_gray(12, 15, 5), 10, 1);
  const Matrix f = testutil::random_matrix(s.pixels(), 4, rng);
  const auto set = make_superpixel_set(s, f);
  for (std::size_t j = 0; j < 10; ++j)
    for (std::size_t c = 0; c < 4; ++c) {
      double sum = 0.0, lo = 1e300, hi = -1e300;
      std::size_t n = 0;
      for (std::size_t p = 0; p < s.pixels(); ++p)
        if (s.assignment[p] == j) {
          sum += f(p, c);
          lo = std::min(lo, f(p, c));
          hi = std::max(hi, f(p, c));
          ++n;
        }
      EXPECT_NEAR(set.features(j, c), sum / static_cast<double>(n), 1e-12);
      EXPECT_LE(lo, set.features(j, c) + 1e-15);
      EXPECT_GE(hi, set.features(j, c) - 1e-15);
      EXPECT_EQ(set.size_of(j), n);
    }
}

TEST(MajorityLabels, Examples) {
  const auto s = raster(1, 8, {0, 0, 0, 0, 1, 1, 2, 2});
  const LabelRaster l{1, 8, 2, {1, 1, 2, 0, 0, 0, 1, 2}};
  EXPECT_EQ(majority_labels(s, l), (std::vector<int>{1, 0, 1}));
}

TEST(AugmentedViews, DegenerateCases) {
  const auto s = raster(1, 4, {0, 1, 1, 1});
  const Matrix f(4, 2, {7, 8, 1, 2, 1, 2, 1, 2});
  const auto set = make_superpixel_set(s, f);
  for (std::uint64_t e = 0; e < 5; ++e) {
    const Matrix v = sample_augmented_views(set, f, 9, e);
    EXPECT_EQ(v.data, set.features.data);
  }
}

TEST(AugmentedViews, UniformFrequency) {
  const auto s = raster(1, 6, {0, 0, 0, 0, 0, 1});
  Matrix f(6, 1);
  for (std::size_t p = 0; p < 6; ++p) f(p, 0) = static_cast<double>(p);
  const auto set = make_superpixel_set(s, f);
  const int trials = 10000;
  std::vector<int> hits(5, 0);
  for (int e = 0; e < trials; ++e) ++hits[static_cast<int>(sample_augmented_views(set, f, 42, e)(0, 0))];
  const double p = 0.2, mean = trials * p, sd = std::sqrt(trials * p * (1 - p));
  for (int h : hits) EXPECT_LT(std::abs(h - mean), 3 * sd) << h;
  // Deterministic in (seed, epoch).
  EXPECT_EQ(sample_augmented_views(set, f, 42, 3), sample_augmented_views(set, f, 42, 3));
}
