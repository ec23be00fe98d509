#pragma once

#include <numeric>
#include <random>

#include "ssgc/binio.hpp"
#include "ssgc/hsi_io.hpp"

namespace ssgc {

struct SynthSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bands = 16;
  std::size_t classes = 4;
  std::size_t regions = 8;    // Voronoi seed points
  std::size_t min_bumps = 3;  // Gaussian bumps per signature
  std::size_t max_bumps = 5;
  double amplitude = 1.5;  // bump heights drawn from [-amplitude, amplitude]
  double noise_std = 0.3;
  double holdout = 0.0;  // fraction of pixels left unlabeled
  std::uint64_t seed = 0;

  void validate() const {
    if (height == 0 || width == 0 || bands == 0) throw Error(ErrorCode::InvalidConfig, "synth dimensions must be positive");
    if (classes == 0 || classes > regions) throw Error(ErrorCode::InvalidConfig, "need 1 <= classes <= regions");
    if (regions > height * width) throw Error(ErrorCode::InvalidConfig, "more regions than pixels");
    if (min_bumps == 0 || min_bumps > max_bumps) throw Error(ErrorCode::InvalidConfig, "bad bump range");
    if (!(amplitude > 0.0)) throw Error(ErrorCode::InvalidConfig, "amplitude must be > 0");
    if (!(noise_std >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise std must be >= 0");
    if (!(holdout >= 0.0 && holdout < 1.0)) throw Error(ErrorCode::InvalidConfig, "holdout must lie in [0,1)");
    if (classes > 65535) throw Error(ErrorCode::InvalidConfig, "too many classes");
  }

  binio::json to_json() const {
    return {{"height", height},       {"width", width},         {"bands", bands},
            {"classes", classes},     {"regions", regions},     {"min_bumps", min_bumps},
            {"max_bumps", max_bumps}, {"amplitude", amplitude}, {"noise_std", noise_std}, {"holdout", holdout},
            {"seed", seed}};
  }
};

struct SynthScene {
  HsiCube cube;
  LabelRaster labels;
  Matrix signatures;             // classes x bands
  std::vector<int> region_of;    // pixel -> Voronoi region
  std::vector<int> region_class; // region -> class id (1-based)
};

// Smooth class signatures: a constant offset plus a few Gaussian bumps.
inline Matrix synth_signatures(std::size_t classes, std::size_t bands, std::size_t min_bumps, std::size_t max_bumps,
                               double amplitude, std::mt19937_64& rng) {
  Matrix sig(classes, bands);
  std::uniform_int_distribution<std::size_t> count(min_bumps, max_bumps);
  std::uniform_real_distribution<double> center(0.0, static_cast<double>(bands > 1 ? bands - 1 : 1));
  std::uniform_real_distribution<double> width(std::max(1.0, bands / 12.0), std::max(1.5, bands / 4.0));
  std::uniform_real_distribution<double> amp(-amplitude, amplitude);
  std::uniform_real_distribution<double> offset(-0.5, 0.5);
  for (std::size_t c = 0; c < classes; ++c) {
    const double base = offset(rng);
    for (std::size_t b = 0; b < bands; ++b) sig(c, b) = base;
    const std::size_t n = count(rng);
    for (std::size_t k = 0; k < n; ++k) {
      const double mu = center(rng), w = width(rng), a = amp(rng);
      for (std::size_t b = 0; b < bands; ++b) {
        const double t = (static_cast<double>(b) - mu) / w;
        sig(c, b) += a * std::exp(-0.5 * t * t);
      }
    }
  }
  return sig;
}

inline SynthScene generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  SynthScene s;
  s.signatures = synth_signatures(spec.classes, spec.bands, spec.min_bumps, spec.max_bumps, spec.amplitude, rng);

  // Well-spaced seed points (best of several uniform candidates, farthest
  // from the seeds so far), so region sizes stay comparable. Region i
  // belongs to class (i mod K) + 1.
  std::uniform_real_distribution<double> uy(0.0, static_cast<double>(spec.height));
  std::uniform_real_distribution<double> ux(0.0, static_cast<double>(spec.width));
  std::vector<std::pair<double, double>> seeds;
  s.region_class.resize(spec.regions);
  for (std::size_t r = 0; r < spec.regions; ++r) {
    std::pair<double, double> best{uy(rng), ux(rng)};
    double best_gap = -1.0;
    for (int c = 0; c < 16 && !seeds.empty(); ++c) {
      const std::pair<double, double> cand = c == 0 ? best : std::pair<double, double>{uy(rng), ux(rng)};
      double gap = std::numeric_limits<double>::infinity();
      for (const auto& q : seeds)
        gap = std::min(gap, (cand.first - q.first) * (cand.first - q.first) +
                                (cand.second - q.second) * (cand.second - q.second));
      if (gap > best_gap) {
        best_gap = gap;
        best = cand;
      }
    }
    seeds.push_back(best);
    s.region_class[r] = static_cast<int>(r % spec.classes) + 1;
  }

  const std::size_t n = spec.height * spec.width;
  s.region_of.resize(n);
  std::vector<double> data(n * spec.bands);
  std::vector<int> labels(n);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t y = 0; y < spec.height; ++y)
    for (std::size_t x = 0; x < spec.width; ++x) {
      const std::size_t p = y * spec.width + x;
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < spec.regions; ++r) {
        const double dy = static_cast<double>(y) + 0.5 - seeds[r].first;
        const double dx = static_cast<double>(x) + 0.5 - seeds[r].second;
        const double d = dy * dy + dx * dx;
        if (d < bd) {
          bd = d;
          best = r;
        }
      }
      s.region_of[p] = static_cast<int>(best);
      labels[p] = s.region_class[best];
      const auto sig = s.signatures.row(static_cast<std::size_t>(labels[p] - 1));
      for (std::size_t b = 0; b < spec.bands; ++b)
        data[p * spec.bands + b] = sig[b] + (spec.noise_std > 0.0 ? spec.noise_std * noise(rng) : 0.0);
    }

  if (spec.holdout > 0.0) {
    std::bernoulli_distribution drop(spec.holdout);
    for (auto& l : labels)
      if (drop(rng)) l = 0;
  }
  s.cube = HsiCube(spec.height, spec.width, spec.bands, std::move(data));
  s.labels = LabelRaster{spec.height, spec.width, spec.classes, std::move(labels)};
  return s;
}

}  // namespace ssgc
