#pragma once

#include <fstream>
#include <set>

#include "ssgc/binio.hpp"
#include "ssgc/encoder.hpp"
#include "ssgc/objective.hpp"

namespace ssgc {

// Which parts of edge learning are active. The four rows of the EGAEL
// ablation are: none, w_pre only, w_emp only, and both.
struct EgaelFlags {
  bool enabled = true;
  bool use_pre = true;     // blend A with the edge network's predictions
  bool use_emp = true;     // empirical weights (supervision when use_pre, else blended directly)
  bool end_to_end = true;  // clustering losses reach the edge network through A

  bool trains_edge_loss() const { return enabled && use_pre && use_emp; }
  bool updates_graph() const { return enabled && (use_pre || use_emp); }

  std::string row_name() const {
    if (!enabled || (!use_pre && !use_emp)) return "none";
    if (use_pre && use_emp) return "full";
    return use_pre ? "pre" : "emp";
  }
};

inline EgaelFlags egael_row(const std::string& name) {
  if (name == "full") return {true, true, true, true};
  if (name == "pre") return {true, true, false, true};
  if (name == "emp") return {true, false, true, false};
  if (name == "none") return {false, false, false, false};
  throw Error(ErrorCode::InvalidConfig, "unknown EGAEL row '" + name + "' (full|pre|emp|none)");
}

struct RunConfig {
  // Inputs. Either a raw cube (auto-preprocess) or a preprocessed directory.
  std::string cube;
  std::string labels;
  std::string segmentation;  // optional external .spseg
  std::string prep_dir;

  std::size_t pca_dims = 20;
  std::size_t superpixels = 275;
  std::size_t clusters = 0;  // 0: class count of the label raster
  double compactness = 0.1;
  int slic_iterations = 10;

  std::size_t layers = 2;
  std::vector<std::size_t> kernels;
  std::vector<std::size_t> channels;
  Variant variant = Variant::Ssgco;
  bool batch_norm = true;

  LossWeights loss;
  bool na_normalize = true;  // l2-normalize both sides of L_NA
  double gamma = 0.45;  // adjacency momentum
  double ema = 0.99;    // target network momentum m
  double lr = 0.05;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  std::size_t predictor_hidden = 512;
  double predictor_lr_scale = 10.0;
  std::size_t epochs = 100;
  int kmeans_restarts = 10;
  std::uint64_t seed = 0;
  EgaelFlags egael;

  SsgcoConfig encoder(std::size_t input_dim) const {
    SsgcoConfig c;
    c.input_dim = input_dim;
    c.layers = layers;
    c.kernels = kernels;
    c.channels = channels;
    c.variant = variant;
    c.batch_norm = batch_norm;
    return c;
  }

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (pca_dims < 1) bad("pca_dims must be >= 1");
    if (superpixels < 1) bad("superpixels must be >= 1");
    if (layers < 1) bad("layers must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) bad("gamma must lie in (0,1)");
    if (!(ema > 0.0 && ema < 1.0)) bad("ema (m) must lie in (0,1)");
    if (!(lr > 0.0)) bad("lr must be > 0");
    if (!(weight_decay >= 0.0)) bad("weight_decay must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) bad("momentum must lie in [0,1)");
    if (!(compactness > 0.0)) bad("compactness must be > 0");
    if (slic_iterations < 1) bad("slic_iterations must be >= 1");
    if (kmeans_restarts < 1) bad("kmeans_restarts must be >= 1");
    if (predictor_hidden < 1) bad("predictor_hidden must be >= 1");
    if (!(predictor_lr_scale > 0.0)) bad("predictor_lr_scale must be > 0");
    loss.validate(false, !egael.trains_edge_loss());
    for (auto k : kernels)
      if (k < 1) bad("kernel sizes must be >= 1");
    for (auto c : channels)
      if (c < 1) bad("channel counts must be >= 1");
  }

  binio::json to_json() const {
    return {{"cube", cube},
            {"labels", labels},
            {"segmentation", segmentation},
            {"prep_dir", prep_dir},
            {"pca_dims", pca_dims},
            {"superpixels", superpixels},
            {"clusters", clusters},
            {"compactness", compactness},
            {"slic_iterations", slic_iterations},
            {"layers", layers},
            {"kernels", kernels},
            {"channels", channels},
            {"variant", to_string(variant)},
            {"batch_norm", batch_norm},
            {"alpha", loss.alpha},
            {"beta", loss.beta},
            {"sigma", loss.sigma},
            {"tau", loss.tau},
            {"na_normalize", na_normalize},
            {"gamma", gamma},
            {"ema", ema},
            {"lr", lr},
            {"weight_decay", weight_decay},
            {"momentum", momentum},
            {"predictor_hidden", predictor_hidden},
            {"predictor_lr_scale", predictor_lr_scale},
            {"epochs", epochs},
            {"kmeans_restarts", kmeans_restarts},
            {"seed", seed},
            {"egael",
             {{"enabled", egael.enabled},
              {"use_pre", egael.use_pre},
              {"use_emp", egael.use_emp},
              {"end_to_end", egael.end_to_end}}}};
  }

  // Overlays the keys present in `j`; unknown keys are rejected.
  void merge_json(const binio::json& j) {
    static const std::set<std::string> known = {
        "cube",   "labels",     "segmentation", "prep_dir",         "pca_dims",           "superpixels",
        "clusters", "compactness", "slic_iterations", "layers",      "kernels",            "channels",
        "variant", "batch_norm", "alpha",        "beta",             "sigma",              "tau", "na_normalize",
        "gamma",  "ema",        "lr",           "weight_decay",     "momentum",           "predictor_hidden",
        "predictor_lr_scale", "epochs", "kmeans_restarts", "seed", "egael", "preset"};
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
    for (const auto& [key, _] : j.items())
      if (!known.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    try {
      if (j.contains("preset")) apply_preset(j.at("preset").get<std::string>());
      auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
      };
      get("cube", cube);
      get("labels", labels);
      get("segmentation", segmentation);
      get("prep_dir", prep_dir);
      get("pca_dims", pca_dims);
      get("superpixels", superpixels);
      get("clusters", clusters);
      get("compactness", compactness);
      get("slic_iterations", slic_iterations);
      get("layers", layers);
      get("kernels", kernels);
      get("channels", channels);
      if (j.contains("variant")) variant = parse_variant(j.at("variant").get<std::string>());
      get("batch_norm", batch_norm);
      get("alpha", loss.alpha);
      get("beta", loss.beta);
      get("sigma", loss.sigma);
      get("tau", loss.tau);
      get("na_normalize", na_normalize);
      get("gamma", gamma);
      get("ema", ema);
      get("lr", lr);
      get("weight_decay", weight_decay);
      get("momentum", momentum);
      get("predictor_hidden", predictor_hidden);
      get("predictor_lr_scale", predictor_lr_scale);
      get("epochs", epochs);
      get("kmeans_restarts", kmeans_restarts);
      get("seed", seed);
      if (j.contains("egael")) {
        const auto& e = j.at("egael");
        if (e.is_string()) {
          egael = egael_row(e.get<std::string>());
        } else {
          for (const auto& [key, _] : e.items())
            if (key != "enabled" && key != "use_pre" && key != "use_emp" && key != "end_to_end")
              throw Error(ErrorCode::InvalidConfig, "unknown egael key '" + key + "'");
          egael.enabled = e.value("enabled", egael.enabled);
          egael.use_pre = e.value("use_pre", egael.use_pre);
          egael.use_emp = e.value("use_emp", egael.use_emp);
          egael.end_to_end = e.value("end_to_end", egael.end_to_end);
        }
      }
    } catch (const binio::json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, std::string("config type error: ") + e.what());
    }
  }

  // Per-dataset settings: M, L, alpha, beta, gamma and PCA dims.
  void apply_preset(const std::string& name) {
    struct Row {
      const char* name;
      std::size_t m, l;
      double alpha, beta, gamma;
      std::size_t d;
    };
    static constexpr Row rows[] = {{"IP", 275, 2, 0.5, 0.01, 0.45, 40},
                                   {"PU", 1000, 4, 0.1, 0.001, 0.85, 20},
                                   {"BO", 4550, 1, 0.001, 0.001, 0.5, 25},
                                   {"TR", 4400, 2, 0.005, 0.1, 0.7, 40}};
    for (const auto& r : rows)
      if (name == r.name) {
        superpixels = r.m;
        layers = r.l;
        loss.alpha = r.alpha;
        loss.beta = r.beta;
        gamma = r.gamma;
        pca_dims = r.d;
        return;
      }
    throw Error(ErrorCode::InvalidConfig, "unknown preset '" + name + "' (IP|PU|BO|TR)");
  }
};

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  binio::json j;
  try {
    j = binio::json::parse(in);
  } catch (const binio::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  RunConfig cfg;
  cfg.merge_json(j);
  return cfg;
}

// FNV-1a over the canonical JSON dump.
inline std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : cfg.to_json().dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ssgc
