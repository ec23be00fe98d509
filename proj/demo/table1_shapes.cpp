// Prints the layer-by-layer shapes of a two-layer SSGCO encoder on a
// 20-band input, next to its parameter tensors.
#include <cstdio>

#include "ssgc/encoder.hpp"

using namespace ssgc;

int main() {
  SsgcoConfig cfg;
  cfg.input_dim = 20;
  cfg.layers = 2;
  cfg.kernels = {7, 5};
  cfg.channels = {8, 16};

  const std::size_t m = 6;
  std::vector<Edge> edges;
  for (std::uint32_t i = 0; i + 1 < m; ++i) edges.push_back({i, i + 1});
  const SpGraph g(m, edges, std::vector<double>(edges.size(), 1.0));

  std::mt19937_64 rng(0);
  ParamSet params;
  init_encoder(params, cfg, rng);
  Tape t;
  Binder bind(t, params, false);
  ShapeTrace trace;
  forward_encoder(bind, cfg, t.constant(Tensor({m, 20}, 0.5)), constant_adjacency(t, g), &trace);

  std::printf("%-12s %s   (M = %zu)\n", "stage", "shape", m);
  for (const auto& [stage, shape] : trace) std::printf("%-12s %s\n", stage.c_str(), shape_str(shape).c_str());
  std::printf("\nparameters:\n");
  for (const auto& p : params) std::printf("  %-26s %s\n", p.name.c_str(), shape_str(p.value.shape).c_str());
}
