#include <gtest/gtest.h>

#include <set>

#include "ssgc/cluster_eval.hpp"
#include "ssgc/synth.hpp"

using namespace ssgc;

TEST(Synth, NoiselessSpectraAreClassSignatures) {
  SynthSpec s;
  s.height = 20;
  s.width = 20;
  s.classes = 2;
  s.regions = 4;
  s.noise_std = 0.0;
  const auto scene = generate(s);
  std::set<std::vector<double>> distinct;
  for (std::size_t p = 0; p < 400; ++p) {
    const auto px = scene.cube.spectrum(p);
    distinct.insert(std::vector<double>(px.begin(), px.end()));
  }
  EXPECT_EQ(distinct.size(), 2u);
  std::set<int> classes(scene.labels.labels.begin(), scene.labels.labels.end());
  EXPECT_EQ(classes, (std::set<int>{1, 2}));
}

TEST(Synth, SingleRegionIsConstant) {
  SynthSpec s;
  s.height = 9;
  s.width = 7;
  s.classes = 1;
  s.regions = 1;
  const auto scene = generate(s);
  for (int l : scene.labels.labels) EXPECT_EQ(l, 1);
}

TEST(Synth, DeterministicPerSeed) {
  SynthSpec s;
  s.height = 24;
  s.width = 24;
  s.seed = 11;
  const auto a = generate(s), b = generate(s);
  EXPECT_TRUE(a.cube == b.cube);
  EXPECT_EQ(a.labels.labels, b.labels.labels);
  s.seed = 12;
  EXPECT_FALSE(generate(s).cube == a.cube);
}

TEST(Synth, NoiselessScenePixelKMeansIsPerfect) {
  SynthSpec s;
  s.noise_std = 0.0;
  s.seed = 3;
  const auto scene = generate(s);
  const auto km = kmeans(scene.cube.pixel_matrix(), 4, 1, 100);
  EXPECT_EQ(compute_metrics(km.assignment, scene.labels).acc, 1.0);
}

// Every class mean recovers its signature within 3 standard errors per band.
TEST(Synth, ClassMeansRecoverSignatures) {
  SynthSpec s;
  s.seed = 5;
  const auto scene = generate(s);
  const std::size_t b = s.bands;
  std::vector<std::vector<double>> sum(s.classes, std::vector<double>(b, 0.0));
  std::vector<std::size_t> n(s.classes, 0);
  for (std::size_t p = 0; p < s.height * s.width; ++p) {
    const auto c = static_cast<std::size_t>(scene.labels.labels[p] - 1);
    ++n[c];
    const auto px = scene.cube.spectrum(p);
    for (std::size_t j = 0; j < b; ++j) sum[c][j] += px[j];
  }
  for (std::size_t c = 0; c < s.classes; ++c) {
    ASSERT_GT(n[c], 0u);
    const double se = s.noise_std / std::sqrt(static_cast<double>(n[c]));
    for (std::size_t j = 0; j < b; ++j)
      EXPECT_LT(std::abs(sum[c][j] / static_cast<double>(n[c]) - scene.signatures(c, j)), 3.0 * se + 1e-12);
  }
}

TEST(Synth, RegionClassMapAndHoldout) {
  SynthSpec s;
  s.holdout = 0.3;
  s.seed = 8;
  const auto scene = generate(s);
  std::size_t dropped = 0;
  for (std::size_t p = 0; p < scene.labels.labels.size(); ++p) {
    const int l = scene.labels.labels[p];
    if (l == 0) {
      ++dropped;
      continue;
    }
    EXPECT_EQ(l, scene.region_class[static_cast<std::size_t>(scene.region_of[p])]);
  }
  const double frac = static_cast<double>(dropped) / 4096.0;
  EXPECT_NEAR(frac, 0.3, 4.0 * std::sqrt(0.3 * 0.7 / 4096.0));
}

TEST(Synth, Validation) {
  SynthSpec s;
  s.classes = 9;
  EXPECT_THROW(generate(s), Error);
  s = {};
  s.noise_std = -1.0;
  EXPECT_THROW(generate(s), Error);
  s = {};
  s.min_bumps = 6;
  EXPECT_THROW(generate(s), Error);
}
