// Library walk-through: generate a scene, preprocess it, train, and report
// per-epoch progress plus the final metrics and edge audit.
#include <cstdio>

#include "ssgc/ssgc.hpp"

using namespace ssgc;

int main(int argc, char** argv) {
  const std::size_t epochs = argc > 1 ? std::stoul(argv[1]) : 30;

  SynthSpec spec;
  spec.seed = 1;
  const SynthScene scene = generate(spec);

  RunConfig cfg;
  cfg.superpixels = 150;
  cfg.epochs = epochs;
  cfg.seed = 1;
  const Prepared prep = preprocess(scene.cube, cfg, scene.labels);
  std::printf("%zu superpixels, %zu edges, PCA keeps %.1f%% of the variance\n", prep.superpixels.size(),
              prep.graph.edge_count(), 100.0 * prep.explained_variance);

  const TrainResult r = train(cfg, prep, [](const binio::json& e) {
    const auto epoch = e["epoch"].get<std::size_t>();
    if (epoch % 10 == 0) std::printf("epoch %3zu  ACC %.4f  NMI %.4f\n", epoch, e["ACC"].get<double>(), e["NMI"].get<double>());
  });
  const MetricsReport& m = *r.metrics;
  std::printf("final: ACC %.4f  NMI %.4f  kappa %.4f  ARI %.4f  (%.1f s)\n", m.acc, m.nmi, m.kappa, m.ari, r.seconds);

  const auto audit = edge_audit(r.w_pre, majority_labels(prep.superpixels.seg, *prep.labels), r.graph.edges());
  std::printf("edges: %zu correct, %zu incorrect; w_pre best accuracy %.4f vs baseline %.4f\n", audit.correct,
              audit.incorrect, audit.best_accuracy, audit.baseline_accuracy);
}
