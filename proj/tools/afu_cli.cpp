// afu: command-line entry point for the toy, smoothness and MNIST runs plus
// curve sampling utilities.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "afu/activations.hpp"
#include "afu/afu.hpp"
#include "afu/config.hpp"
#include "afu/data.hpp"
#include "afu/error.hpp"
#include "afu/experiments.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_config = true) {
  if (with_config) cmd->add_option("--config", f.config, "JSON config file (defaults apply when omitted)");
  cmd->add_option("--seed", f.seed, "Experiment seed; overrides the config file");
  cmd->add_option("--out-dir", f.out_dir, "Output directory; overrides the config file (default: out)");
}

afu::ExperimentConfig resolve(const CommonFlags& f, afu::ExperimentKind kind) {
  afu::ExperimentConfig cfg = f.config.empty() ? afu::default_config(kind) : afu::load_config(f.config);
  if (cfg.experiment != kind) {
    throw afu::ConfigError("config " + f.config + " is for experiment '" +
                           std::string(afu::experiment_name(cfg.experiment)) + "', expected '" +
                           std::string(afu::experiment_name(kind)) + "'");
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.out_dir) cfg.out_dir = *f.out_dir;
  return cfg;
}

void print_manifest(const afu::RunReport& r) {
  for (const auto& p : r.manifest) std::cout << "wrote " << p.string() << '\n';
  std::cout << "wall-clock " << r.wall_clock_seconds << " s\n";
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw afu::ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learnable activation function units: toy, smoothness and MNIST experiments"};
  app.require_subcommand(1);

  // gen-data
  CommonFlags gen_flags;
  double gen_sigma = 0.5;
  auto* gen = app.add_subcommand("gen-data", "Write the 2000-point XOR toy set as CSV (x0,x1,label)");
  add_common(gen, gen_flags, false);
  gen->add_option("--sigma", gen_sigma, "Cluster standard deviation")->check(CLI::PositiveNumber);

  // train-toy
  CommonFlags toy_flags;
  std::optional<std::string> toy_activation, toy_base;
  std::optional<std::size_t> toy_units, toy_epochs;
  auto* toy = app.add_subcommand("train-toy", "Train the 2-4-1 XOR network and emit its fields, curves and report");
  add_common(toy, toy_flags);
  toy->add_option("--activation", toy_activation, "Hidden activation: 'afu' or a fixed activation name");
  toy->add_option("--hidden-units", toy_units, "AFU hidden units N")->check(CLI::PositiveNumber);
  toy->add_option("--base", toy_base, "AFU base activation name");
  toy->add_option("--epochs", toy_epochs, "Maximum epochs")->check(CLI::PositiveNumber);

  // train-mnist
  CommonFlags mnist_flags;
  std::optional<std::string> mnist_dir, mnist_scope, mnist_activation;
  std::optional<std::size_t> mnist_epochs;
  auto* mnist = app.add_subcommand("train-mnist", "Train the dense 784-256-128-10 MNIST network");
  add_common(mnist, mnist_flags);
  mnist->add_option("--mnist-dir", mnist_dir, "Directory with the four IDX files (default: $AFU_MNIST_DIR)");
  mnist->add_option("--scope", mnist_scope, "AFU sharing scope: network, per_layer or per_neuron");
  mnist->add_option("--activation", mnist_activation,
                    "Use a fixed activation (e.g. relu) on every layer instead of AFUs; the output stays linear");
  mnist->add_option("--epochs", mnist_epochs, "Epochs")->check(CLI::PositiveNumber);

  // smoothness
  CommonFlags smooth_flags;
  std::optional<std::string> smooth_afu;
  bool smooth_random = false;
  auto* smooth = app.add_subcommand("smoothness", "Compare ReLU and AFU score fields of a random 5x10 network");
  add_common(smooth, smooth_flags);
  smooth->add_option("--afu", smooth_afu, "AFU parameter file (default: the train-toy AFU in --out-dir)");
  smooth->add_flag("--random-afu", smooth_random, "Use a freshly initialized AFU instead of a trained one");

  // sample-afu
  CommonFlags sa_flags;
  std::string sa_path;
  std::vector<double> sa_range{-5.0, 5.0};
  std::size_t sa_points = 201;
  auto* sample_afu = app.add_subcommand("sample-afu", "Sample an AFU parameter file as a z,g curve");
  add_common(sample_afu, sa_flags, false);
  sample_afu->add_option("--afu", sa_path, "AFU parameter file")->required();
  sample_afu->add_option("--range", sa_range, "Sample interval")->expected(2);
  sample_afu->add_option("--points", sa_points, "Number of samples")->check(CLI::Range(2, 1 << 24));

  // sample-activation
  CommonFlags sx_flags;
  std::string sx_name;
  std::vector<double> sx_range{-5.0, 5.0};
  std::size_t sx_points = 201;
  auto* sample_act = app.add_subcommand("sample-activation", "Sample a fixed activation as a z,g curve");
  add_common(sample_act, sx_flags, false);
  sample_act->add_option("--name", sx_name, "Activation name")->required();
  sample_act->add_option("--range", sx_range, "Sample interval")->expected(2);
  sample_act->add_option("--points", sx_points, "Number of samples")->check(CLI::Range(2, 1 << 24));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      const std::uint64_t seed = gen_flags.seed.value_or(0);
      const fs::path dir = gen_flags.out_dir.value_or("out");
      ensure_dir(dir);
      const afu::data::Dataset ds = afu::data::gen_xor_toy({gen_sigma, seed});
      const fs::path path = dir / ("toy_s" + std::to_string(seed) + "_data.csv");
      afu::data::write_csv(ds, path);
      std::cout << "wrote " << path.string() << '\n';
    } else if (*toy) {
      afu::ExperimentConfig cfg = resolve(toy_flags, afu::ExperimentKind::Toy);
      if (toy_activation) {
        if (*toy_activation != "afu") afu::act::parse_or_throw(*toy_activation);
        cfg.network.layers.front().activation = *toy_activation;
      }
      if (toy_units) cfg.network.afu.hidden_units = *toy_units;
      if (toy_base) cfg.network.afu.base = afu::act::parse_or_throw(*toy_base);
      if (toy_epochs) cfg.epochs = *toy_epochs;
      const afu::ToyResult r = afu::run_toy(cfg);
      print_manifest(r.report);
      std::cout << "final train accuracy " << r.report.final_train_accuracy << '\n';
    } else if (*mnist) {
      afu::ExperimentConfig cfg = resolve(mnist_flags, afu::ExperimentKind::Mnist);
      if (mnist_dir) {
        cfg.mnist_dir = *mnist_dir;
      } else if (cfg.mnist_dir.empty()) {
        if (const char* env = std::getenv("AFU_MNIST_DIR")) cfg.mnist_dir = env;
      }
      if (mnist_scope) cfg.network.afu.scope = afu::parse_scope(*mnist_scope);
      if (mnist_activation) {
        afu::act::parse_or_throw(*mnist_activation);
        for (std::size_t l = 0; l < cfg.network.layers.size(); ++l) {
          const bool last = l + 1 == cfg.network.layers.size();
          cfg.network.layers[l].activation = last ? "linear" : *mnist_activation;
        }
      }
      if (mnist_epochs) cfg.epochs = *mnist_epochs;
      const afu::MnistResult r = afu::run_mnist(cfg);
      print_manifest(r.report);
      std::cout << "final test accuracy " << r.report.final_test_accuracy.value_or(0.0) << '\n';
    } else if (*smooth) {
      afu::ExperimentConfig cfg = resolve(smooth_flags, afu::ExperimentKind::Smoothness);
      if (smooth_afu) cfg.afu_path = *smooth_afu;
      if (smooth_random) cfg.random_afu = true;
      const afu::SmoothnessResult r = afu::smoothness_analysis(cfg);
      print_manifest(r.report);
      std::cout << "roughness relu " << r.roughness_relu << " afu " << r.roughness_afu << '\n';
    } else if (*sample_afu) {
      const afu::Afu unit = afu::load_afu(sa_path);
      const fs::path dir = sa_flags.out_dir.value_or("out");
      ensure_dir(dir);
      const fs::path path = dir / (fs::path(sa_path).stem().string() + "_curve.csv");
      afu::write_curve_csv(unit.sample(sa_range[0], sa_range[1], sa_points), path);
      std::cout << "wrote " << path.string() << '\n';
    } else if (*sample_act) {
      const afu::act::ActivationSpec spec = afu::act::parse_or_throw(sx_name);
      const fs::path dir = sx_flags.out_dir.value_or("out");
      ensure_dir(dir);
      std::vector<afu::CurvePoint> curve;
      for (double z : afu::linspace(sx_range[0], sx_range[1], sx_points)) {
        curve.push_back({z, afu::act::value(spec, z)});
      }
      const fs::path path = dir / (std::string(afu::act::name(spec)) + "_curve.csv");
      afu::write_curve_csv(curve, path);
      std::cout << "wrote " << path.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "afu: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
