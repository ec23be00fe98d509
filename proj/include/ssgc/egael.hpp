#pragma once

#include <cmath>

#include "ssgc/encoder.hpp"

namespace ssgc {

// Soft assignments: entry (i, k) = z_i . mu_k for unit-norm rows.
inline Matrix soft_assignments(const Matrix& embeddings, const Matrix& prototypes, double tol = 1e-9) {
  if (embeddings.cols != prototypes.cols) throw Error(ErrorCode::DimensionMismatch, "embedding/prototype width");
  auto check = [tol](const Matrix& m, const char* what) {
    for (std::size_t i = 0; i < m.rows; ++i)
      if (std::abs(norm2(m.row(i)) - 1.0) > tol)
        throw Error(ErrorCode::NotNormalized, std::string(what) + " row " + std::to_string(i) + " is not unit norm");
  };
  check(embeddings, "embedding");
  check(prototypes, "prototype");
  Matrix out(embeddings.rows, prototypes.rows);
  for (std::size_t i = 0; i < embeddings.rows; ++i)
    for (std::size_t k = 0; k < prototypes.rows; ++k) out(i, k) = dot(embeddings.row(i), prototypes.row(k));
  return out;
}

// conf_u = max_k z_u . mu_k
inline std::vector<double> confidence(const Matrix& assignments) {
  std::vector<double> conf(assignments.rows);
  for (std::size_t i = 0; i < assignments.rows; ++i) {
    const auto r = assignments.row(i);
    conf[i] = *std::max_element(r.begin(), r.end());
  }
  return conf;
}

struct EdgeMlpConfig {
  std::size_t clusters = 0;  // K: input 2K, hidden K, output 1
};

inline void init_edge_mlp(ParamSet& params, const EdgeMlpConfig& cfg, std::mt19937_64& rng,
                          const std::string& prefix = "edge.") {
  const std::size_t k = cfg.clusters;
  params.add(prefix + "fc1.weight", fan_in_uniform({2 * k, k}, 2 * k, rng));
  params.add(prefix + "fc1.bias", fan_in_uniform({k}, 2 * k, rng));
  params.add(prefix + "fc2.weight", fan_in_uniform({k, 1}, k, rng));
  params.add(prefix + "fc2.bias", fan_in_uniform({1}, k, rng));
}

// Edge features [z_u || z_v] (forward) and [z_v || z_u] (reverse), E x 2K.
inline std::pair<Tensor, Tensor> edge_features(const Matrix& assignments, const std::vector<Edge>& edges) {
  const std::size_t k = assignments.cols;
  Tensor fwd({edges.size(), 2 * k}), rev({edges.size(), 2 * k});
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto zu = assignments.row(edges[e].u);
    const auto zv = assignments.row(edges[e].v);
    for (std::size_t j = 0; j < k; ++j) {
      fwd.data[e * 2 * k + j] = zu[j];
      fwd.data[e * 2 * k + k + j] = zv[j];
      rev.data[e * 2 * k + j] = zv[j];
      rev.data[e * 2 * k + k + j] = zu[j];
    }
  }
  return {std::move(fwd), std::move(rev)};
}

// h(.): affine -> ReLU -> affine, pre-sigmoid logit per row.
inline Var forward_edge_mlp(const Binder& bind, Var features, const std::string& prefix = "edge.") {
  Var h = relu(add_row_bias(matmul(features, bind(prefix + "fc1.weight")), bind(prefix + "fc1.bias")));
  return add_row_bias(matmul(h, bind(prefix + "fc2.weight")), bind(prefix + "fc2.bias"));
}

// w_pre = (sigmoid(h([z_u||z_v])) + sigmoid(h([z_v||z_u]))) / 2, one per edge.
inline Var predict_edge_weights(const Binder& bind, const Matrix& assignments, const std::vector<Edge>& edges,
                                const std::string& prefix = "edge.") {
  auto [fwd, rev] = edge_features(assignments, edges);
  Tape& t = bind.tape();
  Var a = sigmoid(forward_edge_mlp(bind, t.constant(std::move(fwd)), prefix));
  Var b = sigmoid(forward_edge_mlp(bind, t.constant(std::move(rev)), prefix));
  return reshape(scale(add(a, b), 0.5), {edges.size()});
}

struct EmpiricalWeights {
  std::vector<double> weights;    // w_emp per edge
  std::vector<double> conf_norm;  // per node
  std::vector<double> sim_norm;   // per edge, before the flip
  std::vector<int> same_cluster;  // ind(u, v)
};

// w_emp = sigmoid((2 ind - 1) * conf_u * conf_v * sim) with conf min-max
// normalized over nodes, sim = z_u . z_v min-max normalized over edges, and
// sim flipped to 1 - sim for edges across clusters.
inline EmpiricalWeights empirical_edge_weights(const std::vector<double>& conf, const Matrix& embeddings,
                                               const std::vector<int>& hard_labels, const std::vector<Edge>& edges) {
  if (conf.size() != embeddings.rows || hard_labels.size() != embeddings.rows)
    throw Error(ErrorCode::DimensionMismatch, "node-level inputs disagree in length");
  EmpiricalWeights out;
  out.conf_norm = min_max_normalize(conf);
  std::vector<double> sim(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) sim[e] = dot(embeddings.row(edges[e].u), embeddings.row(edges[e].v));
  out.sim_norm = min_max_normalize(sim);
  out.weights.resize(edges.size());
  out.same_cluster.resize(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto u = edges[e].u, v = edges[e].v;
    const int ind = hard_labels[u] == hard_labels[v] ? 1 : 0;
    const double s = ind ? out.sim_norm[e] : 1.0 - out.sim_norm[e];
    out.same_cluster[e] = ind;
    out.weights[e] = sigmoid((2.0 * ind - 1.0) * out.conf_norm[u] * out.conf_norm[v] * s);
  }
  return out;
}

// L_E = (1/|E|) sum (w_pre - w_emp)^2; w_emp is treated as constant.
inline Var edge_loss(Var w_pre, const std::vector<double>& w_emp) {
  require(w_pre.size() == w_emp.size(), "edge_loss length mismatch");
  Var col = reshape(w_pre, {w_emp.size(), 1});
  return mean_row_squared_error(col, Tensor({w_emp.size(), 1}, w_emp));
}

// 1 = correct (same ground-truth class), 0 = incorrect, -1 = an endpoint
// has no labeled pixels.
inline std::vector<int> edge_correctness(const std::vector<int>& superpixel_labels, const std::vector<Edge>& edges) {
  std::vector<int> out(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const int a = superpixel_labels.at(edges[e].u);
    const int b = superpixel_labels.at(edges[e].v);
    out[e] = (a == 0 || b == 0) ? -1 : (a == b ? 1 : 0);
  }
  return out;
}

struct EdgeAuditReport {
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  std::vector<double> thresholds;  // edge declared correct iff w_pre > threshold
  std::vector<double> accuracies;
  std::vector<double> balanced_accuracies;
  double best_threshold = 0.0;
  double best_accuracy = 0.0;
  double best_balanced_accuracy = 0.0;
  double baseline_accuracy = 0.0;  // every edge declared correct
  double mean_weight_correct = 0.0;
  double mean_weight_incorrect = 0.0;

  binio::json to_json() const {
    binio::json j;
    j["correct_edges"] = correct;
    j["incorrect_edges"] = incorrect;
    j["thresholds"] = thresholds;
    j["accuracies"] = accuracies;
    j["balanced_accuracies"] = balanced_accuracies;
    j["best_threshold"] = best_threshold;
    j["best_accuracy"] = best_accuracy;
    j["best_balanced_accuracy"] = best_balanced_accuracy;
    j["baseline_accuracy"] = baseline_accuracy;
    j["mean_weight_correct"] = mean_weight_correct;
    j["mean_weight_incorrect"] = mean_weight_incorrect;
    return j;
  }
};

// Treats w_pre as the probability that an edge is correct and sweeps the
// decision threshold. The -inf threshold is the all-correct baseline.
inline EdgeAuditReport edge_audit(const std::vector<double>& w_pre, const std::vector<int>& superpixel_labels,
                                  const std::vector<Edge>& edges) {
  if (w_pre.size() != edges.size()) throw Error(ErrorCode::SizeMismatch, "one weight per edge required");
  const auto truth = edge_correctness(superpixel_labels, edges);
  std::vector<std::pair<double, int>> labeled;
  EdgeAuditReport r;
  double sum_c = 0.0, sum_i = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (truth[e] < 0) continue;
    labeled.emplace_back(w_pre[e], truth[e]);
    if (truth[e]) {
      ++r.correct;
      sum_c += w_pre[e];
    } else {
      ++r.incorrect;
      sum_i += w_pre[e];
    }
  }
  if (labeled.empty()) throw Error(ErrorCode::NoLabeledEdges, "no edge joins two labeled superpixels");
  r.mean_weight_correct = r.correct ? sum_c / static_cast<double>(r.correct) : 0.0;
  r.mean_weight_incorrect = r.incorrect ? sum_i / static_cast<double>(r.incorrect) : 0.0;
  const double n = static_cast<double>(labeled.size());
  r.baseline_accuracy = static_cast<double>(r.correct) / n;

  std::sort(labeled.begin(), labeled.end());
  // Threshold below everything, then at each distinct weight.
  std::size_t tp = r.correct, fp = r.incorrect;  // predicted correct
  auto push = [&](double thr) {
    const std::size_t tn = r.incorrect - fp;
    const double acc = static_cast<double>(tp + tn) / n;
    const double tpr = r.correct ? static_cast<double>(tp) / static_cast<double>(r.correct) : 0.0;
    const double tnr = r.incorrect ? static_cast<double>(tn) / static_cast<double>(r.incorrect) : 0.0;
    const double bal = (r.correct && r.incorrect) ? 0.5 * (tpr + tnr) : (r.correct ? tpr : tnr);
    r.thresholds.push_back(thr);
    r.accuracies.push_back(acc);
    r.balanced_accuracies.push_back(bal);
    if (acc > r.best_accuracy || r.thresholds.size() == 1) {
      r.best_accuracy = acc;
      r.best_threshold = thr;
    }
    r.best_balanced_accuracy = std::max(r.best_balanced_accuracy, bal);
  };
  push(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < labeled.size();) {
    const double w = labeled[i].first;
    while (i < labeled.size() && labeled[i].first == w) {
      if (labeled[i].second)
        --tp;
      else
        --fp;
      ++i;
    }
    push(w);
  }
  return r;
}

// For each ratio r, a copy of the graph with ceil(r * #incorrect) randomly
// chosen incorrect edges removed.
inline std::vector<SpGraph> edge_deletion_sweep(const SpGraph& graph, const std::vector<int>& superpixel_labels,
                                                const std::vector<double>& ratios, std::uint64_t seed) {
  const auto truth = edge_correctness(superpixel_labels, graph.edges());
  std::vector<std::size_t> incorrect;
  for (std::size_t e = 0; e < truth.size(); ++e)
    if (truth[e] == 0) incorrect.push_back(e);
  std::mt19937_64 rng(seed);
  std::shuffle(incorrect.begin(), incorrect.end(), rng);
  std::vector<SpGraph> out;
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::InvalidConfig, "deletion ratio outside [0,1]");
    const auto n = static_cast<std::size_t>(std::ceil(r * static_cast<double>(incorrect.size()) - 1e-12));
    std::vector<std::size_t> drop(incorrect.begin(), incorrect.begin() + static_cast<long>(std::min(n, incorrect.size())));
    out.push_back(remove_edges(graph, drop));
  }
  return out;
}

}  // namespace ssgc
