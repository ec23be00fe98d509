#pragma once

#include <fstream>
#include <set>
#include <utility>

#include "ssgc/common.hpp"
#include "ssgc/superpixel.hpp"

namespace ssgc {

struct Edge {
  std::uint32_t u;
  std::uint32_t v;  // u < v
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

// Sparsity pattern of A + I in CSR form. Every stored entry knows which
// undirected edge it came from (-1 for the diagonal), so gradients with
// respect to normalized entries can be folded back onto edge weights.
struct CsrPattern {
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<long> edge_of;

  std::size_t nnz() const { return col.size(); }
};

// Symmetric weighted superpixel adjacency with a fixed edge support.
class SpGraph {
 public:
  SpGraph() = default;

  SpGraph(std::size_t nodes, std::vector<Edge> edges, std::vector<double> weights)
      : nodes_(nodes), edges_(std::move(edges)), weights_(std::move(weights)) {
    if (weights_.size() != edges_.size()) throw Error(ErrorCode::SizeMismatch, "one weight per edge required");
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto& ed = edges_[e];
      if (!(ed.u < ed.v) || ed.v >= nodes_) throw Error(ErrorCode::ShapeMismatch, "edges must satisfy u < v < M");
      if (e > 0 && !(edges_[e - 1] < ed)) throw Error(ErrorCode::ShapeMismatch, "edges must be sorted and unique");
      if (!(weights_[e] >= 0.0 && weights_[e] <= 1.0))
        throw Error(ErrorCode::WeightOutOfRange, "edge weight " + std::to_string(weights_[e]));
    }
    build_pattern();
  }

  std::size_t nodes() const { return nodes_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<double>& weights() const { return weights_; }
  const CsrPattern& pattern() const { return pattern_; }

  Matrix dense_adjacency() const {
    Matrix a(nodes_, nodes_);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      a(edges_[e].u, edges_[e].v) = weights_[e];
      a(edges_[e].v, edges_[e].u) = weights_[e];
    }
    return a;
  }

 private:
  void build_pattern() {
    std::vector<std::vector<std::pair<std::uint32_t, long>>> rows(nodes_);
    for (std::size_t i = 0; i < nodes_; ++i) rows[i].emplace_back(static_cast<std::uint32_t>(i), -1L);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      rows[edges_[e].u].emplace_back(edges_[e].v, static_cast<long>(e));
      rows[edges_[e].v].emplace_back(edges_[e].u, static_cast<long>(e));
    }
    pattern_ = {};
    pattern_.row_ptr.push_back(0);
    for (auto& r : rows) {
      std::sort(r.begin(), r.end());
      for (const auto& [c, e] : r) {
        pattern_.col.push_back(c);
        pattern_.edge_of.push_back(e);
      }
      pattern_.row_ptr.push_back(pattern_.col.size());
    }
  }

  std::size_t nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<double> weights_;
  CsrPattern pattern_;
};

// A_ij = 1 iff some pixel of sp_i and some pixel of sp_j are 4-neighbors.
inline SpGraph build_adjacency(const Segmentation& seg) {
  std::set<Edge> found;
  const std::size_t h = seg.height;
  const std::size_t w = seg.width;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const auto a = seg.assignment[y * w + x];
      auto note = [&](std::uint32_t b) {
        if (a != b) found.insert(Edge{std::min(a, b), std::max(a, b)});
      };
      if (x + 1 < w) note(seg.assignment[y * w + x + 1]);
      if (y + 1 < h) note(seg.assignment[(y + 1) * w + x]);
    }
  std::vector<Edge> edges(found.begin(), found.end());
  std::vector<double> weights(edges.size(), 1.0);
  return SpGraph(seg.count, std::move(edges), std::move(weights));
}

// D~_ii = 1 + sum_j A_ij for the given edge weights.
inline std::vector<double> self_loop_degrees(const SpGraph& g, std::span<const double> weights) {
  std::vector<double> deg(g.nodes(), 1.0);
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    deg[g.edges()[e].u] += weights[e];
    deg[g.edges()[e].v] += weights[e];
  }
  return deg;
}

// Values of D~^-1/2 (A + I) D~^-1/2 on the graph's CSR pattern.
inline std::vector<double> normalized_values(const SpGraph& g, std::span<const double> weights) {
  if (weights.size() != g.edge_count()) throw Error(ErrorCode::SizeMismatch, "weights do not match edge count");
  const auto deg = self_loop_degrees(g, weights);
  const auto& pat = g.pattern();
  std::vector<double> vals(pat.nnz());
  for (std::size_t i = 0; i < g.nodes(); ++i)
    for (std::size_t k = pat.row_ptr[i]; k < pat.row_ptr[i + 1]; ++k) {
      const double a = pat.edge_of[k] < 0 ? 1.0 : weights[static_cast<std::size_t>(pat.edge_of[k])];
      vals[k] = a / std::sqrt(deg[i] * deg[pat.col[k]]);
    }
  return vals;
}

inline std::vector<double> normalized_values(const SpGraph& g) { return normalized_values(g, g.weights()); }

inline Matrix dense_normalized(const SpGraph& g) {
  const auto vals = normalized_values(g);
  const auto& pat = g.pattern();
  Matrix out(g.nodes(), g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i)
    for (std::size_t k = pat.row_ptr[i]; k < pat.row_ptr[i + 1]; ++k) out(i, pat.col[k]) = vals[k];
  return out;
}

// A <- gamma * A + (1 - gamma) * A_pre on the fixed edge support.
inline SpGraph momentum_update(const SpGraph& g, std::span<const double> predicted, double gamma) {
  if (predicted.size() != g.edge_count()) throw Error(ErrorCode::SizeMismatch, "predicted weights != edge count");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorCode::InvalidConfig, "gamma outside [0,1]");
  std::vector<double> w(g.edge_count());
  for (std::size_t e = 0; e < w.size(); ++e) {
    if (!(predicted[e] >= 0.0 && predicted[e] <= 1.0))
      throw Error(ErrorCode::WeightOutOfRange, "predicted weight " + std::to_string(predicted[e]));
    w[e] = gamma * g.weights()[e] + (1.0 - gamma) * predicted[e];
  }
  return SpGraph(g.nodes(), g.edges(), std::move(w));
}

inline SpGraph with_weights(const SpGraph& g, std::vector<double> weights) {
  return SpGraph(g.nodes(), g.edges(), std::move(weights));
}

// Copy of the graph without the listed edge indices.
inline SpGraph remove_edges(const SpGraph& g, const std::vector<std::size_t>& drop) {
  std::vector<bool> gone(g.edge_count(), false);
  for (auto e : drop) gone.at(e) = true;
  std::vector<Edge> edges;
  std::vector<double> weights;
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (!gone[e]) {
      edges.push_back(g.edges()[e]);
      weights.push_back(g.weights()[e]);
    }
  return SpGraph(g.nodes(), std::move(edges), std::move(weights));
}

inline void dump_graph_jsonl(const std::string& path, const SpGraph& g) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.precision(17);
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    out << "{\"u\":" << g.edges()[e].u << ",\"v\":" << g.edges()[e].v << ",\"w\":" << g.weights()[e] << "}\n";
}

}  // namespace ssgc
