#include <gtest/gtest.h>

#include <png.h>

#include <fstream>

#include "ssgc/pipeline.hpp"
#include "ssgc/synth.hpp"
#include "ssgc/png.hpp"
#include "test_util.hpp"

using namespace ssgc;

namespace {

SynthScene small_scene(std::uint64_t seed = 1) {
  SynthSpec s;
  s.height = 32;
  s.width = 32;
  s.seed = seed;
  return generate(s);
}

RunConfig small_config(std::size_t epochs) {
  RunConfig c;
  c.superpixels = 40;
  c.pca_dims = 16;
  c.epochs = epochs;
  c.kmeans_restarts = 3;
  c.predictor_hidden = 32;
  c.seed = 7;
  return c;
}

}  // namespace

TEST(Pipeline, ZeroEpochsIsInitialClustering) {
  const auto scene = small_scene();
  const auto cfg = small_config(0);
  const auto prep = preprocess(scene.cube, cfg, scene.labels);
  const auto r = train(cfg, prep);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0]["epoch"], 0);

  // Oracle: freshly initialized target encoder, normalized, best-of-restarts k-means.
  ParamSet online;
  const auto enc = cfg.encoder(prep.pixel_features.cols);
  std::mt19937_64 rng(derive_seed(cfg.seed, seed_stream::init));
  init_encoder(online, enc, rng);
  Tape t;
  Binder bind(t, online, false);
  Var z = l2_normalize_rows(forward_encoder(bind, enc, t.constant(Tensor::from(prep.superpixels.features)),
                                            constant_adjacency(t, prep.graph)));
  const auto km = spherical_kmeans_best(z.value().to_matrix(), 4,
                                        derive_seed(derive_seed(cfg.seed, seed_stream::kmeans), 0), 3);
  EXPECT_EQ(r.superpixel_labels, km.assignment);
  EXPECT_EQ(r.graph.weights(), prep.graph.weights());
}

TEST(Pipeline, BitwiseDeterministic) {
  const auto scene = small_scene();
  const auto cfg = small_config(5);
  const auto prep = preprocess(scene.cube, cfg, scene.labels);
  const auto a = train(cfg, prep), b = train(cfg, prep);
  EXPECT_EQ(a.superpixel_labels, b.superpixel_labels);
  EXPECT_EQ(a.embeddings, b.embeddings);
  EXPECT_EQ(a.graph.weights(), b.graph.weights());
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i], b.log[i]);
  EXPECT_EQ(a.log.size(), 6u);
}

TEST(Pipeline, SavedPreparationMatchesAutoPreprocess) {
  const auto scene = small_scene(2);
  const std::string dir = testutil::scratch_dir("prep_equiv");
  write_cube(dir + "/cube.hsic", scene.cube, Dtype::F64);
  write_labels(dir + "/labels.lblr", scene.labels);

  auto cfg = small_config(3);
  cfg.cube = dir + "/cube.hsic";
  cfg.labels = dir + "/labels.lblr";
  const auto direct = prepare_inputs(cfg);
  save_prepared(dir + "/prep", direct);

  auto cfg2 = small_config(3);
  cfg2.prep_dir = dir + "/prep";
  const auto loaded = prepare_inputs(cfg2);
  EXPECT_EQ(loaded.pixel_features, direct.pixel_features);
  EXPECT_EQ(loaded.superpixels.seg.assignment, direct.superpixels.seg.assignment);
  EXPECT_EQ(loaded.graph.edges(), direct.graph.edges());
  const auto a = train(cfg, direct), b = train(cfg2, loaded);
  EXPECT_EQ(a.superpixel_labels, b.superpixel_labels);
  EXPECT_EQ(a.metrics->acc, b.metrics->acc);
}

TEST(Pipeline, GroundTruthAgainstItself) {
  const auto scene = small_scene();
  const auto m = compute_metrics(scene.labels.labels, scene.labels);
  EXPECT_EQ(m.acc, 1.0);
  EXPECT_NEAR(m.nmi, 1.0, 1e-12);
  EXPECT_NEAR(m.kappa, 1.0, 1e-12);
}

TEST(Pipeline, RandomSpecsRoundTripThroughPreprocess) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 20; ++i) {
    SynthSpec s;
    s.height = 8 + rng() % 25;
    s.width = 8 + rng() % 25;
    s.bands = 4 + rng() % 13;
    s.classes = 1 + rng() % 4;
    s.regions = s.classes + rng() % 4;
    s.noise_std = 0.05 * static_cast<double>(rng() % 8);
    s.seed = rng();
    const auto scene = generate(s);
    RunConfig c;
    c.pca_dims = 1 + rng() % 20;
    c.superpixels = 1 + rng() % 30;
    const auto prep = preprocess(scene.cube, c, scene.labels);
    EXPECT_EQ(prep.pixel_features.cols, std::min(c.pca_dims, s.bands));
    EXPECT_EQ(prep.superpixels.size(), c.superpixels);
    EXPECT_TRUE(disconnected_superpixels(prep.superpixels.seg).empty());
    const std::string dir = testutil::scratch_dir("fuzz");
    save_prepared(dir, prep);
    const auto back = load_prepared(dir);
    EXPECT_EQ(back.pixel_features, prep.pixel_features);
    EXPECT_EQ(back.superpixels.seg.assignment, prep.superpixels.seg.assignment);
    EXPECT_EQ(back.labels->labels, scene.labels.labels);
  }
}

TEST(Pipeline, TooManyClustersAndMissingGroundTruth) {
  const auto scene = small_scene();
  auto cfg = small_config(1);
  cfg.superpixels = 3;
  const auto prep = preprocess(scene.cube, cfg, scene.labels);
  try {
    train(cfg, prep);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooManyClusters);
  }
  const auto bare = preprocess(scene.cube, small_config(1));
  try {
    train(small_config(1), bare);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingGroundTruth);
  }
}

TEST(Pipeline, AblationGridAlwaysHasFullMethod) {
  const auto scene = small_scene();
  const auto cfg = small_config(2);
  const auto prep = preprocess(scene.cube, cfg, scene.labels);
  const auto one = ablate(cfg, prep, {Variant::Ssgco}, {"full"}, {1});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].variant, "SSGCO");
  const auto two = ablate(cfg, prep, {Variant::Mlp}, {"none"}, {1});
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].variant, "SSGCO");
  EXPECT_EQ(two[0].egael, "full");
}

TEST(Pipeline, EdgeSweepSingleRatio) {
  const auto scene = small_scene();
  const auto cfg = small_config(2);
  const auto prep = preprocess(scene.cube, cfg, scene.labels);
  const auto pts = edge_sweep(cfg, prep, {0.0}, {1});
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].removed, 0u);
  EXPECT_EQ(pts[0].runs.size(), 1u);
  auto same_seed = cfg;
  same_seed.seed = 1;
  EXPECT_EQ(pts[0].mean_acc(), train(same_seed, prep).metrics->acc);
}

TEST(Pipeline, ZeroEdgeNetworkAuditEqualsBaseline) {
  const auto scene = small_scene();
  const auto cfg = small_config(0);
  const auto prep = preprocess(scene.cube, cfg, scene.labels);
  auto r = train(cfg, prep);
  for (auto& p : r.edge) std::fill(p.value.data.begin(), p.value.data.end(), 0.0);
  Tape t;
  Binder bind(t, r.edge, false);
  const auto w = predict_edge_weights(bind, soft_assignments(r.embeddings, r.prototypes), r.graph.edges()).value().data;
  const auto audit = edge_audit(w, majority_labels(prep.superpixels.seg, *prep.labels), r.graph.edges());
  EXPECT_EQ(audit.best_accuracy, audit.baseline_accuracy);
}

TEST(Pipeline, CheckpointStateRoundTrip) {
  const auto scene = small_scene();
  const auto cfg = small_config(2);
  const auto prep = preprocess(scene.cube, cfg, scene.labels);
  const auto r = train(cfg, prep);
  const std::string dir = testutil::scratch_dir("ckpt");
  save_run_checkpoint(dir + "/checkpoint.bin", r, cfg);
  const auto s = load_checkpoint_state(dir + "/checkpoint.bin");
  EXPECT_EQ(s.nodes, prep.superpixels.size());
  EXPECT_EQ(s.edges, r.graph.edges());
  EXPECT_EQ(s.edge_weights, r.graph.weights());
  EXPECT_EQ(s.w_pre, r.w_pre);
  EXPECT_EQ(s.assignment, r.superpixel_labels);
  EXPECT_EQ(s.config, cfg.to_json());
  const auto ck = load_checkpoint(dir + "/checkpoint.bin");
  EXPECT_EQ(ck.at("online.enc.layer0.conv.weight").data, r.online.at("enc.layer0.conv.weight").value.data);
}

TEST(RunDirs, NeverOverwritten) {
  const std::string base = testutil::scratch_dir("rundir") + "/run";
  const auto a = fresh_run_dir(base);
  write_json_file(a + "/manifest.json", {{"x", 1}});
  const auto b = fresh_run_dir(base);
  EXPECT_NE(a, b);
  write_json_file(b + "/manifest.json", {{"x", 2}});
  const auto c = fresh_run_dir(base);
  EXPECT_NE(c, a);
  EXPECT_NE(c, b);
  std::ifstream in(a + "/manifest.json");
  EXPECT_EQ(binio::json::parse(in)["x"], 1);
}

TEST(Config, JsonMergePresetsAndHash) {
  RunConfig c;
  c.merge_json({{"preset", "PU"}, {"epochs", 5}});
  EXPECT_EQ(c.superpixels, 1000u);
  EXPECT_EQ(c.layers, 4u);
  EXPECT_EQ(c.loss.alpha, 0.1);
  EXPECT_EQ(c.loss.beta, 0.001);
  EXPECT_EQ(c.gamma, 0.85);
  EXPECT_EQ(c.pca_dims, 20u);
  EXPECT_EQ(c.epochs, 5u);
  EXPECT_THROW(c.merge_json({{"epoch", 5}}), Error);
  EXPECT_THROW(c.merge_json({{"egael", {{"bogus", true}}}}), Error);
  EXPECT_THROW(c.merge_json({{"epochs", "many"}}), Error);
  EXPECT_THROW(c.apply_preset("XX"), Error);

  RunConfig d;
  d.merge_json(c.to_json());
  EXPECT_EQ(config_hash(c), config_hash(d));
  d.seed = 1;
  EXPECT_NE(config_hash(c), config_hash(d));

  RunConfig bad;
  bad.gamma = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  RunConfig none;
  none.egael = egael_row("none");
  none.loss.beta = 0.0;
  EXPECT_NO_THROW(none.validate());
}

TEST(Config, PaperDefaults) {
  const RunConfig c;
  EXPECT_EQ(c.loss.sigma, 1e-3);
  EXPECT_EQ(c.loss.tau, 0.7);
  EXPECT_EQ(c.ema, 0.99);
  EXPECT_EQ(c.lr, 0.05);
  EXPECT_EQ(c.weight_decay, 5e-4);
  EXPECT_EQ(c.momentum, 0.9);
  EXPECT_EQ(c.predictor_hidden, 512u);
  EXPECT_EQ(c.predictor_lr_scale, 10.0);
}

TEST(Png, WritesReadableImage) {
  const std::string path = testutil::scratch_dir("png") + "/map.png";
  std::vector<int> labels = {0, 1, 2, 3, 4, 5};
  write_label_png(path, labels, 2, 3);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  ASSERT_TRUE(png_image_begin_read_from_file(&img, path.c_str()));
  EXPECT_EQ(img.width, 3u);
  EXPECT_EQ(img.height, 2u);
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  ASSERT_TRUE(png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr));
  for (std::size_t i = 0; i < 6; ++i) {
    const auto c = palette_color(labels[i]);
    EXPECT_EQ(buf[3 * i], c[0]);
    EXPECT_EQ(buf[3 * i + 1], c[1]);
    EXPECT_EQ(buf[3 * i + 2], c[2]);
  }
  EXPECT_THROW(write_label_png(path, labels, 2, 2), Error);
}
