#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "ssgc/png.hpp"
#include "ssgc/ssgc.hpp"

using namespace ssgc;

namespace {

// Flags shared by every command that builds a RunConfig. Values given on the
// command line override the config file, which overrides the defaults.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::string> preset, cube, labels, segmentation, prep_dir, variant, egael;
  std::optional<std::size_t> pca_dims, superpixels, clusters, layers, epochs, predictor_hidden;
  std::optional<double> alpha, beta, sigma, tau, gamma, ema, lr, weight_decay, momentum, compactness;
  std::optional<std::uint64_t> seed;
  std::optional<int> restarts;
  std::optional<bool> na_normalize, batch_norm;
  std::vector<std::size_t> kernels, channels;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--preset", preset, "dataset preset: IP, PU, BO or TR");
    app->add_option("--cube", cube, "input cube (.hsic)");
    app->add_option("--labels", labels, "ground-truth raster (.lblr)");
    app->add_option("--segmentation", segmentation, "external superpixel raster (.spseg)");
    app->add_option("--prep", prep_dir, "preprocessed directory");
    app->add_option("--pca-dims", pca_dims);
    app->add_option("--superpixels,-M", superpixels);
    app->add_option("--clusters,-K", clusters, "cluster count (default: label classes)");
    app->add_option("--compactness", compactness);
    app->add_option("--layers,-L", layers);
    app->add_option("--kernels", kernels)->delimiter(',');
    app->add_option("--channels", channels)->delimiter(',');
    app->add_option("--variant", variant, "SSGCO|MLP|Conv1D|GraphConv|Conv1D-Graph|Graph-Conv1D");
    app->add_option("--batch-norm", batch_norm);
    app->add_option("--egael", egael, "full|pre|emp|none");
    app->add_option("--alpha", alpha);
    app->add_option("--beta", beta);
    app->add_option("--sigma", sigma);
    app->add_option("--tau", tau);
    app->add_option("--gamma", gamma);
    app->add_option("--ema", ema, "target momentum m");
    app->add_option("--lr", lr);
    app->add_option("--weight-decay", weight_decay);
    app->add_option("--momentum", momentum);
    app->add_option("--predictor-hidden", predictor_hidden);
    app->add_option("--na-normalize", na_normalize);
    app->add_option("--epochs,-T", epochs);
    app->add_option("--restarts", restarts, "k-means restarts");
    app->add_option("--seed", seed);
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    binio::json j = binio::json::object();
    auto put = [&](const char* key, const auto& opt) {
      if (opt) j[key] = *opt;
    };
    put("preset", preset);
    put("cube", cube);
    put("labels", labels);
    put("segmentation", segmentation);
    put("prep_dir", prep_dir);
    put("variant", variant);
    put("egael", egael);
    put("pca_dims", pca_dims);
    put("superpixels", superpixels);
    put("clusters", clusters);
    put("compactness", compactness);
    put("layers", layers);
    put("batch_norm", batch_norm);
    put("alpha", alpha);
    put("beta", beta);
    put("sigma", sigma);
    put("tau", tau);
    put("gamma", gamma);
    put("ema", ema);
    put("lr", lr);
    put("weight_decay", weight_decay);
    put("momentum", momentum);
    put("predictor_hidden", predictor_hidden);
    put("na_normalize", na_normalize);
    put("epochs", epochs);
    put("kmeans_restarts", restarts);
    put("seed", seed);
    if (!kernels.empty()) j["kernels"] = kernels;
    if (!channels.empty()) j["channels"] = channels;
    // A preset on the command line applies before the remaining flags.
    if (j.contains("preset")) {
      cfg.apply_preset(j["preset"].get<std::string>());
      j.erase("preset");
    }
    cfg.merge_json(j);
    cfg.validate();
    return cfg;
  }
};

std::string join(const std::string& dir, const std::string& name) { return (std::filesystem::path(dir) / name).string(); }

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int cmd_synth(const SynthSpec& spec, const std::string& out) {
  const auto scene = generate(spec);
  std::filesystem::create_directories(out);
  write_cube(join(out, "cube.hsic"), scene.cube, Dtype::F32);
  write_labels(join(out, "labels.lblr"), scene.labels);
  write_label_png(join(out, "groundtruth.png"), scene.labels.labels, spec.height, spec.width);
  write_json_file(join(out, "manifest.json"), {{"command", "synth"}, {"spec", spec.to_json()}, {"seed", spec.seed}});
  std::cerr << "wrote " << out << "/cube.hsic (" << spec.height << "x" << spec.width << "x" << spec.bands << ")\n";
  return 0;
}

int cmd_preprocess(const RunConfig& cfg, const std::string& out) {
  if (cfg.cube.empty()) throw Error(ErrorCode::InvalidConfig, "preprocess needs --cube");
  const Prepared p = prepare_inputs(cfg);
  save_prepared(out, p);
  write_json_file(join(out, "manifest.json"), make_manifest("preprocess", cfg,
                                                            {{"superpixels", p.superpixels.size()},
                                                             {"edges", p.graph.edge_count()},
                                                             {"explained_variance", p.explained_variance}}));
  std::cerr << "prepared " << p.superpixels.size() << " superpixels, " << p.graph.edge_count() << " edges -> " << out
            << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& out_base, bool quiet) {
  const Prepared prep = prepare_inputs(cfg);
  const std::string dir = fresh_run_dir(out_base);
  std::ofstream log(join(dir, "train_log.jsonl"));
  const auto result = train(cfg, prep, [&](const binio::json& entry) {
    log << entry.dump() << '\n';
    log.flush();
    if (!quiet) {
      std::cerr << "epoch " << entry["epoch"].get<std::size_t>();
      if (entry.contains("loss")) std::cerr << "  loss " << num(entry["loss"].get<double>());
      if (entry.contains("ACC")) std::cerr << "  ACC " << num(entry["ACC"].get<double>());
      std::cerr << '\n';
    }
  });
  write_label_png(join(dir, "clustermap.png"), result.pixel_labels, prep.height, prep.width);
  write_labels(join(dir, "prediction.lblr"), LabelRaster{prep.height, prep.width, result.clusters, result.pixel_labels});
  write_segmentation(join(dir, "segmentation.spseg"), prep.superpixels.seg);
  save_run_checkpoint(join(dir, "checkpoint.bin"), result, cfg);
  binio::json metrics = {{"clusters", result.clusters}, {"epochs", cfg.epochs}, {"seconds", result.seconds}};
  if (result.metrics) metrics["metrics"] = result.metrics->to_json();
  write_json_file(join(dir, "metrics.json"), metrics);
  write_json_file(join(dir, "manifest.json"),
                  make_manifest("train", cfg, {{"superpixels", prep.superpixels.size()}, {"run_dir", dir}}));
  if (result.metrics)
    std::cout << "ACC " << num(result.metrics->acc) << "  NMI " << num(result.metrics->nmi) << "  kappa "
              << num(result.metrics->kappa) << "  ARI " << num(result.metrics->ari) << '\n';
  std::cout << dir << '\n';
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::string& out) {
  const LabelRaster pred = load_labels(pred_path), gt = load_labels(gt_path);
  if (pred.height != gt.height || pred.width != gt.width)
    throw Error(ErrorCode::DimensionMismatch, "prediction and ground truth differ in size");
  const auto m = compute_metrics(pred.labels, gt);
  const auto j = m.to_json();
  std::cout << j.dump(2) << '\n';
  if (!out.empty()) write_json_file(out, j);
  return 0;
}

std::vector<Variant> parse_variants(const std::vector<std::string>& names) {
  std::vector<Variant> out;
  for (const auto& n : names) out.push_back(parse_variant(n));
  return out;
}

int cmd_ablate(const RunConfig& cfg, const std::vector<std::string>& variants, const std::vector<std::string>& rows,
               const std::vector<std::uint64_t>& seeds_in, const std::string& out_base) {
  const Prepared prep = prepare_inputs(cfg);
  const std::vector<std::uint64_t> seeds = seeds_in.empty() ? std::vector<std::uint64_t>{cfg.seed} : seeds_in;
  const auto result = ablate(cfg, prep, parse_variants(variants), rows, seeds);
  const std::string dir = fresh_run_dir(out_base);

  // One row per (variant, EGAEL row) with the metrics averaged over seeds.
  struct Agg {
    std::string variant, egael;
    double acc = 0, nmi = 0, ari = 0, kappa = 0, acc_sq = 0;
    std::size_t n = 0;
  };
  std::vector<Agg> agg;
  for (const auto& r : result) {
    auto it = std::find_if(agg.begin(), agg.end(), [&](const Agg& a) { return a.variant == r.variant && a.egael == r.egael; });
    if (it == agg.end()) it = agg.insert(agg.end(), Agg{r.variant, r.egael});
    it->acc += r.metrics.acc;
    it->acc_sq += r.metrics.acc * r.metrics.acc;
    it->nmi += r.metrics.nmi;
    it->ari += r.metrics.ari;
    it->kappa += r.metrics.kappa;
    ++it->n;
  }
  binio::json table = binio::json::array(), runs = binio::json::array();
  std::vector<std::vector<std::string>> csv;
  for (const auto& a : agg) {
    const double n = static_cast<double>(a.n), mean = a.acc / n;
    const double sd = std::sqrt(std::max(0.0, a.acc_sq / n - mean * mean));
    table.push_back({{"variant", a.variant}, {"egael", a.egael}, {"runs", a.n}, {"ACC", mean}, {"ACC_std", sd},
                     {"NMI", a.nmi / n}, {"ARI", a.ari / n}, {"kappa", a.kappa / n}});
    csv.push_back({a.variant, a.egael, std::to_string(a.n), num(mean), num(sd), num(a.nmi / n), num(a.ari / n),
                   num(a.kappa / n)});
    std::cout << a.variant << " / " << a.egael << ": ACC " << num(mean) << "  NMI " << num(a.nmi / n) << "  ARI "
              << num(a.ari / n) << '\n';
  }
  for (const auto& r : result)
    runs.push_back({{"variant", r.variant}, {"egael", r.egael}, {"seed", r.seed}, {"seconds", r.seconds},
                    {"metrics", r.metrics.to_json()}});
  write_json_file(join(dir, "ablation.json"), {{"table", table}, {"runs", runs}});
  write_csv(join(dir, "ablation.csv"), {"variant", "egael", "runs", "ACC", "ACC_std", "NMI", "ARI", "kappa"}, csv);
  write_json_file(join(dir, "manifest.json"), make_manifest("ablate", cfg, {{"seeds", seeds}, {"run_dir", dir}}));
  std::cout << dir << '\n';
  return 0;
}

// Audits the edge network of a finished run against ground truth.
int cmd_edge_audit(const std::string& run_dir, const std::string& labels_override) {
  const auto state = load_checkpoint_state(join(run_dir, "checkpoint.bin"));
  std::string labels_path = labels_override;
  if (labels_path.empty()) labels_path = state.config.value("labels", std::string());
  if (labels_path.empty() && state.config.contains("prep_dir")) {
    const std::string prep_labels = join(state.config["prep_dir"].get<std::string>(), "labels.lblr");
    if (std::filesystem::exists(prep_labels)) labels_path = prep_labels;
  }
  if (labels_path.empty()) throw Error(ErrorCode::MissingGroundTruth, "edge audit needs --labels");
  const LabelRaster gt = load_labels(labels_path);
  const auto seg = import_segmentation(join(run_dir, "segmentation.spseg"), gt.height, gt.width).seg;
  if (state.w_pre.empty()) throw Error(ErrorCode::NoLabeledEdges, "run has no edges to audit");
  const auto report = edge_audit(state.w_pre, majority_labels(seg, gt), state.edges);
  write_json_file(join(run_dir, "edge_audit.json"), report.to_json());
  std::cout << "edges correct " << report.correct << ", incorrect " << report.incorrect << "\n"
            << "baseline accuracy " << num(report.baseline_accuracy) << ", best " << num(report.best_accuracy)
            << " at threshold " << report.best_threshold << ", best balanced " << num(report.best_balanced_accuracy)
            << "\nmean w_pre correct " << num(report.mean_weight_correct) << ", incorrect "
            << num(report.mean_weight_incorrect) << '\n';
  return 0;
}

int cmd_edge_sweep(const RunConfig& cfg, const std::vector<double>& ratios, const std::vector<std::uint64_t>& seeds_in,
                   const std::string& out_base) {
  const Prepared prep = prepare_inputs(cfg);
  const std::vector<std::uint64_t> seeds = seeds_in.empty() ? std::vector<std::uint64_t>{cfg.seed} : seeds_in;
  const auto points = edge_sweep(cfg, prep, ratios, seeds);
  const std::string dir = fresh_run_dir(out_base);
  binio::json j = binio::json::array();
  std::vector<std::vector<std::string>> csv;
  for (const auto& p : points) {
    binio::json runs = binio::json::array();
    for (const auto& r : p.runs) runs.push_back(r.to_json());
    j.push_back({{"ratio", p.ratio}, {"removed", p.removed}, {"edges", p.edges}, {"mean_ACC", p.mean_acc()}, {"runs", runs}});
    csv.push_back({num(p.ratio), std::to_string(p.removed), std::to_string(p.edges), num(p.mean_acc())});
    std::cout << "ratio " << num(p.ratio) << ": removed " << p.removed << ", mean ACC " << num(p.mean_acc()) << '\n';
  }
  write_json_file(join(dir, "edge_sweep.json"), j);
  write_csv(join(dir, "edge_sweep.csv"), {"ratio", "removed", "edges", "mean_ACC"}, csv);
  write_json_file(join(dir, "manifest.json"),
                  make_manifest("edge-sweep", cfg, {{"ratios", ratios}, {"seeds", seeds}, {"run_dir", dir}}));
  std::cout << dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Superpixel graph clustering for hyperspectral images"};
  app.require_subcommand(1);

  SynthSpec spec;
  std::string synth_out = "synth";
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled cube");
  synth->add_option("--out,-o", synth_out);
  synth->add_option("--height", spec.height);
  synth->add_option("--width", spec.width);
  synth->add_option("--bands", spec.bands);
  synth->add_option("--classes", spec.classes);
  synth->add_option("--regions", spec.regions);
  synth->add_option("--noise", spec.noise_std);
  synth->add_option("--amplitude", spec.amplitude);
  synth->add_option("--holdout", spec.holdout, "fraction of pixels left unlabeled");
  synth->add_option("--seed", spec.seed);

  ConfigFlags prep_flags, train_flags, ablate_flags, sweep_flags;
  std::string prep_out = "prepared", train_out = "runs/train", ablate_out = "runs/ablate", sweep_out = "runs/sweep";
  bool quiet = false;

  auto* pre = app.add_subcommand("preprocess", "standardize, PCA, segment and build the graph");
  prep_flags.attach(pre);
  pre->add_option("--out,-o", prep_out);

  auto* tr = app.add_subcommand("train", "train and cluster");
  train_flags.attach(tr);
  tr->add_option("--out,-o", train_out, "run directory (a suffix is added if it already holds a run)");
  tr->add_flag("--quiet,-q", quiet);

  std::string pred_path, gt_path, eval_out;
  auto* ev = app.add_subcommand("eval", "score a predicted raster against ground truth");
  ev->add_option("--pred", pred_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--gt", gt_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--out,-o", eval_out, "also write the report here");

  std::vector<std::string> variants, rows;
  std::vector<std::uint64_t> ablate_seeds, sweep_seeds;
  auto* ab = app.add_subcommand("ablate", "encoder variant and EGAEL ablation grid");
  ablate_flags.attach(ab);
  ab->add_option("--variants", variants)->delimiter(',');
  ab->add_option("--egael-rows", rows)->delimiter(',');
  ab->add_option("--seeds", ablate_seeds)->delimiter(',');
  ab->add_option("--out,-o", ablate_out);

  std::string audit_run, audit_labels;
  auto* au = app.add_subcommand("edge-audit", "accuracy of predicted edge weights for a trained run");
  au->add_option("run", audit_run, "run directory")->required()->check(CLI::ExistingDirectory);
  au->add_option("--labels", audit_labels, "ground truth (default: the run's configured labels)");

  std::vector<double> ratios = {0.0, 0.25, 0.5, 0.75, 1.0};
  auto* sw = app.add_subcommand("edge-sweep", "retrain with a share of incorrect edges deleted");
  sweep_flags.attach(sw);
  sw->add_option("--ratios", ratios)->delimiter(',');
  sw->add_option("--seeds", sweep_seeds)->delimiter(',');
  sw->add_option("--out,-o", sweep_out);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(spec, synth_out);
    if (*pre) return cmd_preprocess(prep_flags.resolve(), prep_out);
    if (*tr) return cmd_train(train_flags.resolve(), train_out, quiet);
    if (*ev) return cmd_eval(pred_path, gt_path, eval_out);
    if (*ab) return cmd_ablate(ablate_flags.resolve(), variants, rows, ablate_seeds, ablate_out);
    if (*au) return cmd_edge_audit(audit_run, audit_labels);
    if (*sw) return cmd_edge_sweep(sweep_flags.resolve(), ratios, sweep_seeds, sweep_out);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
