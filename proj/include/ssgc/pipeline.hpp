#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>

#include "ssgc/cluster_eval.hpp"
#include "ssgc/config.hpp"
#include "ssgc/egael.hpp"
#include "ssgc/optim.hpp"
#include "ssgc/pca.hpp"
#include "ssgc/superpixel.hpp"

namespace ssgc {

// splitmix64 of (seed, stream): independent sub-seeds from the one run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace seed_stream {
inline constexpr std::uint64_t segmentation = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t views = 3;
inline constexpr std::uint64_t noise = 4;
inline constexpr std::uint64_t kmeans = 5;
inline constexpr std::uint64_t edge_deletion = 6;
}  // namespace seed_stream

// Everything training needs: PCA pixel features, superpixels, and the graph.
struct Prepared {
  std::size_t height = 0;
  std::size_t width = 0;
  Matrix pixel_features;  // N x d
  SuperpixelSet superpixels;
  SpGraph graph;
  std::optional<LabelRaster> labels;
  double explained_variance = 0.0;  // fraction kept by the d components
};

inline Prepared assemble_prepared(Matrix pixel_features, Segmentation seg, std::optional<LabelRaster> labels) {
  if (labels && (labels->height != seg.height || labels->width != seg.width))
    throw Error(ErrorCode::DimensionMismatch, "label raster does not match the cube");
  Prepared p;
  p.height = seg.height;
  p.width = seg.width;
  p.superpixels = make_superpixel_set(std::move(seg), pixel_features);
  p.pixel_features = std::move(pixel_features);
  p.graph = build_adjacency(p.superpixels.seg);
  p.labels = std::move(labels);
  return p;
}

// Band standardization, PCA to d = min(d, bands), first-component gray image,
// segmentation into M superpixels (or an imported raster), mean features and
// the spatial adjacency graph.
inline Prepared preprocess(const HsiCube& cube, const RunConfig& cfg, std::optional<LabelRaster> labels = {},
                           std::optional<Segmentation> imported = {}) {
  const HsiCube standardized = standardize_bands(cube);
  const std::size_t d = std::min(cfg.pca_dims, cube.bands);
  if (d < cfg.pca_dims)
    warn("pca_dims " + std::to_string(cfg.pca_dims) + " exceeds band count; using " + std::to_string(d));
  const Matrix pixels = standardized.pixel_matrix();
  const PcaModel model = fit_pca(pixels, d);
  Matrix features = project(model, pixels);

  Segmentation seg;
  if (imported) {
    if (imported->height != cube.height || imported->width != cube.width)
      throw Error(ErrorCode::DimensionMismatch, "segmentation raster does not match the cube");
    seg = std::move(*imported);
  } else {
    SlicOptions opts;
    opts.compactness = cfg.compactness;
    opts.iterations = cfg.slic_iterations;
    seg = segment(first_principal_gray(standardized), cfg.superpixels,
                  derive_seed(cfg.seed, seed_stream::segmentation), opts);
  }
  Prepared p = assemble_prepared(std::move(features), std::move(seg), std::move(labels));
  p.explained_variance = model.explained_variance_ratio(d);
  return p;
}

// Writes features (f64, exact), segmentation, optional labels and an index.
inline void save_prepared(const std::string& dir, const Prepared& p) {
  std::filesystem::create_directories(dir);
  write_cube(dir + "/features.hsic", HsiCube(p.height, p.width, p.pixel_features.cols, p.pixel_features.data),
             Dtype::F64);
  write_segmentation(dir + "/segmentation.spseg", p.superpixels.seg);
  if (p.labels) write_labels(dir + "/labels.lblr", *p.labels);
  dump_graph_jsonl(dir + "/graph.jsonl", p.graph);
  std::ofstream out(dir + "/prep.json");
  out << binio::json{{"height", p.height},
                     {"width", p.width},
                     {"pca_dims", p.pixel_features.cols},
                     {"superpixels", p.superpixels.size()},
                     {"edges", p.graph.edge_count()},
                     {"explained_variance", p.explained_variance},
                     {"has_labels", p.labels.has_value()}}
             .dump(2)
      << '\n';
}

inline Prepared load_prepared(const std::string& dir) {
  const HsiCube features = load_cube(dir + "/features.hsic");
  auto imported = import_segmentation(dir + "/segmentation.spseg", features.height, features.width);
  std::optional<LabelRaster> labels;
  if (std::filesystem::exists(dir + "/labels.lblr")) labels = load_labels(dir + "/labels.lblr");
  Prepared p = assemble_prepared(features.pixel_matrix(), std::move(imported.seg), std::move(labels));
  std::ifstream in(dir + "/prep.json");
  if (in) p.explained_variance = binio::json::parse(in).value("explained_variance", 0.0);
  return p;
}

// Resolves the inputs named in the config: a preprocessed directory, or a
// cube (plus optional labels and segmentation) that is preprocessed here.
inline Prepared prepare_inputs(const RunConfig& cfg) {
  if (!cfg.prep_dir.empty()) {
    Prepared p = load_prepared(cfg.prep_dir);
    if (!cfg.labels.empty()) p.labels = load_labels(cfg.labels);
    return p;
  }
  if (cfg.cube.empty()) throw Error(ErrorCode::InvalidConfig, "no input: set cube or prep_dir");
  HsiCube cube = load_cube(cfg.cube);
  std::optional<LabelRaster> labels;
  if (!cfg.labels.empty()) labels = load_labels(cfg.labels);
  std::optional<Segmentation> seg;
  if (!cfg.segmentation.empty()) seg = import_segmentation(cfg.segmentation, cube.height, cube.width).seg;
  return preprocess(cube, cfg, std::move(labels), std::move(seg));
}

struct TrainResult {
  std::vector<int> superpixel_labels;  // final R, 0-based clusters
  std::vector<int> pixel_labels;       // 1-based for rasters
  std::optional<MetricsReport> metrics;
  std::vector<binio::json> log;
  SpGraph graph;              // final adjacency weights
  std::vector<double> w_pre;  // edge-network output on the final state
  Matrix embeddings;          // normalized f'(X)
  Matrix prototypes;
  ParamSet online, target, edge;
  std::size_t clusters = 0;
  double seconds = 0.0;
};

inline std::size_t resolve_clusters(const RunConfig& cfg, const Prepared& p) {
  if (cfg.clusters > 0) return cfg.clusters;
  if (p.labels && p.labels->classes > 0) return p.labels->classes;
  throw Error(ErrorCode::MissingGroundTruth, "cluster count unset and no label raster to infer it from");
}

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline void require_finite(const Matrix& m, const char* what) {
  if (!all_finite(m.data)) throw Error(ErrorCode::NonFiniteValue, std::string(what) + " contains NaN/Inf");
}

}  // namespace detail

using EpochCallback = std::function<void(const binio::json&)>;

// The training loop. Epoch 0 is the initial clustering of f'(X); each later
// epoch updates the adjacency, takes one full-batch SGD step on
// L = L_NA + alpha L_PC + beta L_E, moves the target network, and reclusters.
inline TrainResult train(const RunConfig& cfg, const Prepared& prep, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::size_t m = prep.superpixels.size();
  const std::size_t k = resolve_clusters(cfg, prep);
  if (k > m)
    throw Error(ErrorCode::TooManyClusters, std::to_string(k) + " clusters for " + std::to_string(m) + " superpixels");
  const SsgcoConfig enc = cfg.encoder(prep.pixel_features.cols);
  const std::size_t f = encoder_output_dim(enc);
  const auto& egael = cfg.egael;

  TrainResult res;
  res.clusters = k;
  std::mt19937_64 init_rng(derive_seed(cfg.seed, seed_stream::init));
  init_encoder(res.online, enc, init_rng);
  init_predictor(res.online, {f, cfg.predictor_hidden, cfg.predictor_lr_scale}, init_rng);
  init_edge_mlp(res.edge, {k}, init_rng);
  res.target = clone_params(res.online, "enc.");
  res.graph = prep.graph;
  SpGraph& graph = res.graph;
  const Tensor x = Tensor::from(prep.superpixels.features);

  auto embed_target = [&](const Tensor& input, bool normalize) {
    Tape t;
    Binder bind(t, res.target, false);
    Var out = forward_encoder(bind, enc, t.constant(input), constant_adjacency(t, graph));
    if (normalize) out = l2_normalize_rows(out);
    return out.value();
  };
  auto recluster = [&](std::size_t epoch) {
    res.embeddings = embed_target(x, true).to_matrix();
    auto km = spherical_kmeans_best(res.embeddings, k, derive_seed(derive_seed(cfg.seed, seed_stream::kmeans), epoch),
                                    cfg.kmeans_restarts);
    res.superpixel_labels = std::move(km.assignment);
    res.prototypes = std::move(km.centroids);
    return km.objective;
  };
  auto evaluate = [&](binio::json& entry) {
    if (!prep.labels) return;
    std::vector<int> pix = labels_to_pixels(res.superpixel_labels, prep.superpixels.seg);
    const auto mr = compute_metrics(pix, *prep.labels);
    entry["ACC"] = mr.acc;
    entry["NMI"] = mr.nmi;
    entry["ARI"] = mr.ari;
  };
  auto emit = [&](binio::json entry) {
    if (on_epoch) on_epoch(entry);
    res.log.push_back(std::move(entry));
  };

  {
    const double obj = recluster(0);
    binio::json entry = {{"epoch", 0}, {"kmeans_objective", obj}, {"mean_edge_weight", detail::mean_of(graph.weights())}};
    evaluate(entry);
    emit(std::move(entry));
  }

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    try {
      Tape t;
      Binder online(t, res.online, true);
      Binder edge_net(t, res.edge, true);
      res.online.zero_grad();
      res.edge.zero_grad();
      binio::json entry = {{"epoch", epoch}};

      // Edge weights from the current clustering state.
      std::optional<Var> w_pre, l_e;
      EmpiricalWeights emp;
      const bool have_edges = graph.edge_count() > 0;
      if (egael.updates_graph() && have_edges) {
        const Matrix soft = soft_assignments(res.embeddings, res.prototypes);
        if (egael.use_emp) emp = empirical_edge_weights(confidence(soft), res.embeddings, res.superpixel_labels, graph.edges());
        if (egael.use_pre) w_pre = predict_edge_weights(edge_net, soft, graph.edges());
        if (egael.trains_edge_loss()) l_e = edge_loss(*w_pre, emp.weights);
      }

      // A <- gamma A + (1 - gamma) A_pre, then renormalize.
      AdjacencyOperand adj;
      if (w_pre) {
        Tensor kept({graph.edge_count()});
        for (std::size_t e = 0; e < graph.edge_count(); ++e) kept.data[e] = cfg.gamma * graph.weights()[e];
        graph = momentum_update(graph, w_pre->value().data, cfg.gamma);
        if (egael.end_to_end) {
          Var blended = add_constant(scale(*w_pre, 1.0 - cfg.gamma), kept);
          adj = {&graph.pattern(), normalize_adjacency(graph, blended)};
        } else {
          adj = constant_adjacency(t, graph);
        }
      } else {
        if (egael.updates_graph() && egael.use_emp && have_edges) graph = momentum_update(graph, emp.weights, cfg.gamma);
        adj = constant_adjacency(t, graph);
      }

      // Augmented views and forward passes.
      const Matrix views = sample_augmented_views(prep.superpixels, prep.pixel_features,
                                                  derive_seed(cfg.seed, seed_stream::views), epoch);
      Var fx = forward_encoder(online, enc, t.constant(x), adj);
      const Tensor target_plus = embed_target(Tensor::from(views), false);

      const Tensor noise = gaussian_noise(m, f, derive_seed(cfg.seed, seed_stream::noise), epoch);
      Var l_na = neighborhood_alignment_loss(fx, target_plus, cfg.loss.sigma, noise,
                                             [&](Var v) { return forward_predictor(online, v); }, cfg.na_normalize);
      const Prototypes protos = build_prototypes(fx, target_plus, res.superpixel_labels, k);
      Var l_pc = prototype_contrast_loss(protos.online, protos.target, cfg.loss.tau);
      Var total = total_loss(l_na, l_pc, l_e, cfg.loss.alpha, cfg.loss.beta);

      t.backward(total);
      double edge_grad = 0.0;
      for (const auto& p : res.edge)
        for (double g : p.grad) edge_grad += g * g;
      const double lr = cosine_lr(static_cast<double>(epoch - 1), static_cast<double>(cfg.epochs), cfg.lr);
      sgd_step(res.online, lr, cfg.weight_decay, cfg.momentum);
      if (std::any_of(res.edge.begin(), res.edge.end(), [](const Parameter& p) { return p.has_grad; }))
        sgd_step(res.edge, lr, cfg.weight_decay, cfg.momentum);
      momentum_update_target(res.target, res.online, cfg.ema);

      const double obj = recluster(epoch);
      detail::require_finite(res.embeddings, "target embeddings");

      entry["lr"] = lr;
      entry["L_NA"] = l_na.item();
      entry["L_PC"] = l_pc.item();
      if (l_e) entry["L_E"] = l_e->item();
      entry["loss"] = total.item();
      entry["kmeans_objective"] = obj;
      entry["mean_edge_weight"] = detail::mean_of(graph.weights());
      if (!emp.weights.empty()) entry["mean_w_emp"] = detail::mean_of(emp.weights);
      if (w_pre) {
        entry["mean_w_pre"] = detail::mean_of(w_pre->value().data);
        entry["edge_grad_norm"] = std::sqrt(edge_grad);
      }
      evaluate(entry);
      emit(std::move(entry));
    } catch (const Error& e) {
      throw Error(e.code(), "epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }

  // Edge-network output on the final clustering state (used by the audit).
  if (graph.edge_count() > 0) {
    Tape t;
    Binder edge_net(t, res.edge, false);
    res.w_pre = predict_edge_weights(edge_net, soft_assignments(res.embeddings, res.prototypes), graph.edges())
                    .value()
                    .data;
  }
  res.pixel_labels = labels_to_pixels(res.superpixel_labels, prep.superpixels.seg);
  for (auto& l : res.pixel_labels) ++l;
  if (prep.labels) res.metrics = compute_metrics(res.pixel_labels, *prep.labels);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return res;
}

// Checkpoint: online, target and edge parameters plus the final state.
inline void save_run_checkpoint(const std::string& path, const TrainResult& r, const RunConfig& cfg) {
  NamedTensors tensors;
  append_params(tensors, "online.", r.online);
  append_params(tensors, "target.", r.target);
  append_params(tensors, "edge_net.", r.edge);
  std::vector<double> edges, assignment(r.superpixel_labels.begin(), r.superpixel_labels.end());
  for (const auto& e : r.graph.edges()) {
    edges.push_back(static_cast<double>(e.u));
    edges.push_back(static_cast<double>(e.v));
  }
  tensors.emplace_back("state.edges", Tensor({r.graph.edge_count(), 2}, edges));
  tensors.emplace_back("state.edge_weights", Tensor({r.graph.edge_count()}, r.graph.weights()));
  tensors.emplace_back("state.w_pre", Tensor({r.w_pre.size()}, r.w_pre));
  tensors.emplace_back("state.assignment", Tensor({assignment.size()}, assignment));
  tensors.emplace_back("state.prototypes", Tensor::from(r.prototypes));
  save_checkpoint(path, tensors, {{"config", cfg.to_json()}, {"clusters", r.clusters}, {"nodes", r.graph.nodes()}});
}

struct CheckpointState {
  std::size_t nodes = 0;
  std::vector<Edge> edges;
  std::vector<double> edge_weights;
  std::vector<double> w_pre;
  std::vector<int> assignment;
  binio::json config;
};

inline CheckpointState load_checkpoint_state(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  CheckpointState s;
  s.nodes = ck.meta.value("nodes", std::size_t{0});
  s.config = ck.meta.value("config", binio::json::object());
  const auto& e = ck.at("state.edges");
  for (std::size_t i = 0; i + 1 < e.data.size(); i += 2)
    s.edges.push_back({static_cast<std::uint32_t>(e.data[i]), static_cast<std::uint32_t>(e.data[i + 1])});
  s.edge_weights = ck.at("state.edge_weights").data;
  s.w_pre = ck.at("state.w_pre").data;
  for (double a : ck.at("state.assignment").data) s.assignment.push_back(static_cast<int>(a));
  return s;
}

struct AblationRow {
  std::string variant;
  std::string egael;
  std::uint64_t seed = 0;
  MetricsReport metrics;
  double seconds = 0.0;
};

// Trains every (variant, EGAEL row, seed) combination on the same inputs.
// The full method (SSGCO with full EGAEL) is always part of the grid.
inline std::vector<AblationRow> ablate(const RunConfig& base, const Prepared& prep, std::vector<Variant> variants,
                                       std::vector<std::string> egael_rows, const std::vector<std::uint64_t>& seeds) {
  if (!prep.labels) throw Error(ErrorCode::MissingGroundTruth, "ablation needs a label raster");
  if (variants.empty()) variants.push_back(Variant::Ssgco);
  if (egael_rows.empty()) egael_rows.push_back("full");
  std::vector<std::pair<Variant, std::string>> grid;
  for (auto v : variants)
    for (const auto& e : egael_rows) grid.emplace_back(v, e);
  if (std::find(grid.begin(), grid.end(), std::pair<Variant, std::string>{Variant::Ssgco, "full"}) == grid.end())
    grid.insert(grid.begin(), {Variant::Ssgco, "full"});
  std::vector<AblationRow> rows;
  for (const auto& [v, e] : grid)
    for (auto seed : seeds) {
      RunConfig cfg = base;
      cfg.variant = v;
      cfg.egael = egael_row(e);
      cfg.seed = seed;
      const auto r = train(cfg, prep);
      rows.push_back({to_string(v), e, seed, *r.metrics, r.seconds});
    }
  return rows;
}

struct SweepPoint {
  double ratio = 0.0;
  std::size_t removed = 0;
  std::size_t edges = 0;
  std::vector<MetricsReport> runs;  // one per seed
  double mean_acc() const {
    double s = 0.0;
    for (const auto& r : runs) s += r.acc;
    return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
  }
};

// Trains on copies of the graph with a growing share of incorrect edges
// (edges joining superpixels of different ground-truth classes) removed.
inline std::vector<SweepPoint> edge_sweep(const RunConfig& base, const Prepared& prep, const std::vector<double>& ratios,
                                          const std::vector<std::uint64_t>& seeds) {
  if (!prep.labels) throw Error(ErrorCode::MissingGroundTruth, "edge sweep needs a label raster");
  const auto sp_labels = majority_labels(prep.superpixels.seg, *prep.labels);
  const auto graphs =
      edge_deletion_sweep(prep.graph, sp_labels, ratios, derive_seed(base.seed, seed_stream::edge_deletion));
  std::vector<SweepPoint> out;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    Prepared p = prep;
    p.graph = graphs[i];
    SweepPoint point{ratios[i], prep.graph.edge_count() - graphs[i].edge_count(), graphs[i].edge_count(), {}};
    for (auto seed : seeds) {
      RunConfig cfg = base;
      cfg.seed = seed;
      point.runs.push_back(*train(cfg, p).metrics);
    }
    out.push_back(std::move(point));
  }
  return out;
}

// First of <base>, <base>-2, <base>-3, ... without a manifest; never reuses
// a directory that already holds one.
inline std::string fresh_run_dir(const std::string& base) {
  namespace fs = std::filesystem;
  std::string dir = base;
  for (int i = 2; fs::exists(fs::path(dir) / "manifest.json"); ++i) dir = base + "-" + std::to_string(i);
  fs::create_directories(dir);
  return dir;
}

inline void write_json_file(const std::string& path, const binio::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << j.dump(2) << '\n';
}

inline binio::json make_manifest(const std::string& command, const RunConfig& cfg, binio::json extra = {}) {
  binio::json m = {{"command", command},
                   {"config", cfg.to_json()},
                   {"config_hash", config_hash(cfg)},
                   {"seed", cfg.seed},
                   {"format_version", 1}};
  if (extra.is_object())
    for (auto& [k, v] : extra.items()) m[k] = v;
  return m;
}

}  // namespace ssgc
