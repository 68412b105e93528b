#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <string_view>

#include "afu/grid.hpp"
#include "afu/losses.hpp"
#include "afu/network.hpp"
#include "afu/optim.hpp"

namespace afu {

enum class ExperimentKind { Toy, Mnist, Smoothness };

std::string_view experiment_name(ExperimentKind kind);
ExperimentKind parse_experiment(std::string_view name);

struct OptimSettings {
  std::string kind = "adam";  // "adam" or "adadelta"
  double lr = 0.01;           // Adam step size
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;  // Adam: 1e-8, AdaDelta: 1e-6 unless configured
  double rho = 0.9;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Toy;
  std::uint64_t seed = 0;
  NetworkSpec network;
  loss::LossKind loss = loss::LossKind::Hinge;
  OptimSettings optim;
  optim::LrSchedule schedule{1.0, 1.0};
  std::size_t epochs = 500;
  std::size_t batch_size = 0;  // 0 = full batch
  double early_stop_accuracy = 1.0;

  // data
  double toy_sigma = 0.5;
  std::filesystem::path mnist_dir;
  std::size_t train_subset = 10000;
  std::size_t test_subset = 2000;

  // smoothness
  std::filesystem::path afu_path;
  bool random_afu = false;
  std::size_t depth = 5;
  std::size_t width = 10;

  GridSpec field_grid;
  double curve_min = -5.0, curve_max = 5.0;
  std::size_t curve_points = 201;

  std::filesystem::path out_dir = "out";
};

// Shipped defaults for each experiment.
ExperimentConfig default_config(ExperimentKind kind);

// Overlays `j` on the defaults of the experiment it names. Unknown keys and
// invalid values throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

}  // namespace afu
