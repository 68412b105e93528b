#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "afu/config.hpp"
#include "afu/error.hpp"
#include "afu/experiments.hpp"
#include "test_support.hpp"

using namespace afu;
namespace fs = std::filesystem;

namespace {

ExperimentConfig short_toy(const fs::path& out, std::size_t epochs = 15) {
  ExperimentConfig cfg = default_config(ExperimentKind::Toy);
  cfg.epochs = epochs;
  cfg.out_dir = out;
  cfg.field_grid.resolution = 41;
  cfg.curve_points = 21;
  return cfg;
}

}  // namespace

TEST(Config, DefaultsPerExperiment) {
  const auto toy = default_config(ExperimentKind::Toy);
  EXPECT_EQ(toy.network.layers.size(), 2u);
  EXPECT_EQ(toy.network.layers[0].activation, "afu");
  EXPECT_EQ(toy.optim.kind, "adam");
  EXPECT_EQ(toy.epochs, 500u);
  const auto mnist = default_config(ExperimentKind::Mnist);
  EXPECT_EQ(mnist.network.input_dim, 784u);
  EXPECT_EQ(mnist.optim.kind, "adadelta");
  EXPECT_EQ(mnist.schedule.gamma, 0.7);
  EXPECT_EQ(mnist.network.layers[0].dropout, 0.25);
  EXPECT_EQ(mnist.network.layers[1].dropout, 0.5);
  const auto smooth = default_config(ExperimentKind::Smoothness);
  EXPECT_EQ(smooth.network.layers.size(), 6u);
}

TEST(Config, OverlayAndRoundTrip) {
  const auto j = nlohmann::json::parse(R"({"experiment": "toy", "seed": 7, "afu": {"hidden_units": 128,
      "base": "sigmoid"}, "epochs": 20, "grid": {"resolution": 51}})");
  const ExperimentConfig cfg = config_from_json(j);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.network.afu.hidden_units, 128u);
  EXPECT_EQ(cfg.network.afu.base.kind, act::ActivationKind::Sigmoid);
  EXPECT_EQ(cfg.field_grid.resolution, 51u);
  EXPECT_EQ(cfg.optim.lr, 0.01);
  const ExperimentConfig back = config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
  EXPECT_EQ(to_json(back).dump(), to_json(cfg).dump());
}

TEST(Config, RejectsInvalid) {
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"experiment": "cifar"})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"epochz": 3})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"epochs": 0})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"afu": {"base": "gish"}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"afu": {"scope": "global"}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"optim": {"kind": "sgd"}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"schedule": {"gamma": 2}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"seed": "zero"})")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ShippedFilesParse) {
  for (const char* name : {"toy.json", "mnist.json", "smoothness.json"}) {
    const fs::path p = fs::path(AFU_SOURCE_DIR) / "configs" / name;
    EXPECT_NO_THROW(load_config(p)) << p;
  }
  EXPECT_EQ(load_config(fs::path(AFU_SOURCE_DIR) / "configs/mnist.json").experiment, ExperimentKind::Mnist);
}

TEST(RunTag, NamesEachVariant) {
  ExperimentConfig cfg = default_config(ExperimentKind::Toy);
  EXPECT_EQ(run_tag(cfg), "toy-afu8-relu_s0");
  cfg.network.layers[0].activation = "tanh";
  cfg.seed = 3;
  EXPECT_EQ(run_tag(cfg), "toy-tanh_s3");
  ExperimentConfig m = default_config(ExperimentKind::Mnist);
  m.network.afu.scope = SharingScope::PerLayer;
  EXPECT_EQ(run_tag(m), "mnist-afu-per_layer_s0");
  EXPECT_EQ(run_tag(default_config(ExperimentKind::Smoothness)), "smooth_s0");
}

TEST(Toy, EmitsManifestAndSaneReport) {
  test::TempDir dir("toy");
  const ToyResult r = run_toy(short_toy(dir.path()));
  const std::vector<std::string> expected{"boundary_field.csv", "boundary_lines.csv", "afu_before.csv",
                                          "afu_after.csv",      "afu.json",           "neuron0.csv",
                                          "neuron1.csv",        "neuron2.csv",        "neuron3.csv",
                                          "report.json"};
  ASSERT_EQ(r.report.manifest.size(), expected.size());
  for (const std::string& what : expected) {
    EXPECT_TRUE(fs::exists(dir / ("toy-afu8-relu_s0_" + what))) << what;
  }
  EXPECT_NEAR(r.report.initial_loss, 1.0, 0.3);
  EXPECT_EQ(r.report.epochs.size(), 15u);
  for (const auto& e : r.report.epochs) {
    EXPECT_TRUE(std::isfinite(e.train_loss));
    ASSERT_TRUE(e.train_accuracy.has_value());
    EXPECT_GE(*e.train_accuracy, 0.0);
    EXPECT_LE(*e.train_accuracy, 1.0);
  }
  const std::string field = test::slurp(dir / "toy-afu8-relu_s0_boundary_field.csv");
  EXPECT_EQ(std::count(field.begin(), field.end(), '\n'), 41 * 41 + 1);
  EXPECT_EQ(test::slurp(dir / "toy-afu8-relu_s0_report.json").find("wall"), std::string::npos);
}

TEST(Toy, RerunIsByteIdentical) {
  test::TempDir dir("toy-rerun");
  const ToyResult first = run_toy(short_toy(dir.path()));
  std::vector<std::string> before;
  for (const fs::path& p : first.report.manifest) before.push_back(test::slurp(p));
  const ToyResult second = run_toy(short_toy(dir.path()));
  ASSERT_EQ(second.report.manifest, first.report.manifest);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(test::slurp(second.report.manifest[i]), before[i]) << first.report.manifest[i].filename();
  }
}

TEST(Toy, EarlyStopHonoursThreshold) {
  test::TempDir dir("toy-stop");
  ExperimentConfig cfg = short_toy(dir.path(), 50);
  cfg.early_stop_accuracy = 0.5;
  const ToyResult r = run_toy(cfg);
  EXPECT_LT(r.report.epochs.size(), 50u);
  EXPECT_GE(*r.report.epochs.back().train_accuracy, 0.5);
}

TEST(Toy, FixedActivationBaselineHasNoAfuFiles) {
  test::TempDir dir("toy-relu");
  ExperimentConfig cfg = short_toy(dir.path());
  cfg.network.layers[0].activation = "relu";
  const ToyResult r = run_toy(cfg);
  EXPECT_FALSE(r.afu_before.has_value());
  EXPECT_FALSE(fs::exists(dir / "toy-relu_s0_afu_after.csv"));
  EXPECT_TRUE(fs::exists(dir / "toy-relu_s0_neuron3.csv"));
}

TEST(Train, DivergenceNamesTheEpoch) {
  ExperimentConfig cfg = default_config(ExperimentKind::Toy);
  cfg.network.layers = {{1, "linear", 0.0}};
  cfg.epochs = 3;
  Network net({DenseLayer{Tensor({1, 2}, 1e307), Tensor({1}, 0.0), act::ActivationSpec{act::ActivationKind::Linear}, 0.0}},
              {}, SharingScope::Network);
  const data::Dataset ds(Tensor({2, 2}, 10.0), {1, -1}, data::LabelKind::Signed, 2);
  try {
    train(net, ds, cfg);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos) << e.what();
  }
}

TEST(Smoothness, MissingAfuSourceIsAConfigError) {
  test::TempDir dir("smooth-missing");
  ExperimentConfig cfg = default_config(ExperimentKind::Smoothness);
  cfg.out_dir = dir.path();
  EXPECT_THROW(smoothness_analysis(cfg), ConfigError);
  cfg.afu_path = dir / "nope.json";
  EXPECT_THROW(smoothness_analysis(cfg), ConfigError);
}

TEST(Smoothness, SharedThetaAndReproducibleFields) {
  test::TempDir dir("smooth");
  ExperimentConfig cfg = default_config(ExperimentKind::Smoothness);
  cfg.out_dir = dir.path();
  cfg.random_afu = true;
  cfg.field_grid.resolution = 51;
  const SmoothnessResult r1 = smoothness_analysis(cfg);
  const std::string relu1 = test::slurp(dir / "smooth_s0_relu_field.csv");
  const std::string afu1 = test::slurp(dir / "smooth_s0_afu_field.csv");
  const SmoothnessResult r2 = smoothness_analysis(cfg);
  EXPECT_EQ(relu1, test::slurp(dir / "smooth_s0_relu_field.csv"));
  EXPECT_EQ(afu1, test::slurp(dir / "smooth_s0_afu_field.csv"));
  EXPECT_EQ(r1.roughness_relu, r2.roughness_relu);
  EXPECT_EQ(r1.relu_field.values.size(), 51u * 51u);
  EXPECT_GT(r1.roughness_relu, 0.0);

  const Network relu = smoothness_network(cfg);
  EXPECT_EQ(relu.layers().size(), 6u);
  const Network twin = with_shared_afu(relu, Afu::from_values({act::ActivationKind::Linear}, {1}, {0}, {1}, 0));
  for (std::size_t l = 0; l < 6; ++l) EXPECT_EQ(relu.layers()[l].weights.data, twin.layers()[l].weights.data);
  EXPECT_EQ(twin.afus().size(), 1u);
}

TEST(Smoothness, LinearAndConstantNetworksAreFlat) {
  const GridSpec dyadic{-3, 3, -3, 3, 193};
  DenseLayer zero{Tensor({1, 2}, 0.0), Tensor({1}, 0.4), act::ActivationSpec{act::ActivationKind::Linear}, 0.0};
  EXPECT_EQ(roughness(score_field(Network({zero}, {}, SharingScope::Network), dyadic)), 0.0);
  DenseLayer x0{Tensor::matrix(1, 2, {1, 0}), Tensor({1}, 0.0), act::ActivationSpec{act::ActivationKind::Linear}, 0.0};
  EXPECT_EQ(roughness(score_field(Network({x0}, {}, SharingScope::Network), dyadic)), 0.0);
}

TEST(Mnist, MissingDirectoryGivesDownloadHint) {
  ExperimentConfig cfg = default_config(ExperimentKind::Mnist);
  cfg.mnist_dir = "/nonexistent/mnist";
  try {
    run_mnist(cfg);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("train-images-idx3-ubyte"), std::string::npos);
    EXPECT_NE(msg.find("download"), std::string::npos);
  }
}

TEST(Mnist, TinyFixtureRunEmitsPerLayerCurves) {
  test::TempDir dir("mnist-tiny");
  Rng rng(0);
  for (const char* split : {"train", "t10k"}) {
    std::vector<std::uint8_t> px(40 * 784), lab(40);
    for (auto& p : px) p = static_cast<std::uint8_t>(rng.uniform(0, 256));
    for (std::size_t i = 0; i < 40; ++i) lab[i] = static_cast<std::uint8_t>(i % 10);
    data::write_mnist_idx(dir / (std::string(split) + "-images-idx3-ubyte"),
                          dir / (std::string(split) + "-labels-idx1-ubyte"), 28, 28, px, lab);
  }
  ExperimentConfig cfg = default_config(ExperimentKind::Mnist);
  cfg.mnist_dir = dir.path();
  cfg.out_dir = dir / "out";
  cfg.train_subset = 32;
  cfg.test_subset = 16;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.network.afu.scope = SharingScope::PerLayer;
  cfg.curve_points = 11;
  const MnistResult r = run_mnist(cfg);
  EXPECT_EQ(r.network.afus().size(), 3u);
  for (int a = 0; a < 3; ++a) {
    EXPECT_TRUE(fs::exists(cfg.out_dir / ("mnist-afu-per_layer_s0_afu" + std::to_string(a) + "_curve.csv")));
  }
  EXPECT_NEAR(r.report.initial_loss, std::log(10.0), 0.5);
  ASSERT_TRUE(r.report.final_test_accuracy.has_value());
  EXPECT_EQ(r.report.epochs[1].lr_multiplier, 0.7);
}
