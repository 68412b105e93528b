#pragma once

#include <cstddef>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "afu/config.hpp"
#include "afu/data.hpp"
#include "afu/grid.hpp"
#include "afu/network.hpp"

namespace afu {

struct EpochRecord {
  std::size_t epoch = 0;
  double lr_multiplier = 1.0;
  double train_loss = 0.0;  // sample-weighted mean over the epoch's batches
  std::optional<double> train_accuracy;
  std::optional<double> test_accuracy;
};

struct RunReport {
  std::string tag;
  std::uint64_t seed = 0;
  double initial_loss = 0.0;  // first batch, before any update
  std::vector<EpochRecord> epochs;
  double final_train_accuracy = 0.0;
  std::optional<double> final_test_accuracy;
  double wall_clock_seconds = 0.0;
  nlohmann::ordered_json config;
  std::vector<std::filesystem::path> manifest;
  nlohmann::ordered_json extras = nlohmann::ordered_json::object();
};

// Report as JSON. Wall-clock time is left out so reruns are byte-identical.
nlohmann::ordered_json report_json(const RunReport& report);
void write_report(const RunReport& report, const std::filesystem::path& path);

struct TrainLog {
  double initial_loss = 0.0;
  std::vector<EpochRecord> epochs;
};

// Trains `net` in place with the loss, optimizer, schedule, batch size and
// early-stop threshold of `cfg`. Throws NumericError naming the epoch when
// the loss or a gradient stops being finite.
TrainLog train(Network& net, const data::Dataset& train_set, const ExperimentConfig& cfg,
               const data::Dataset* test_set = nullptr);

// Output file prefix for a run, e.g. "toy-afu8-relu_s0".
std::string run_tag(const ExperimentConfig& cfg);
std::filesystem::path output_path(const ExperimentConfig& cfg, const std::string& what);

struct ToyResult {
  RunReport report;
  Network network;
  std::optional<Afu> afu_before;
};

ToyResult run_toy(const ExperimentConfig& cfg);

struct SmoothnessResult {
  RunReport report;
  GridField relu_field;
  GridField afu_field;
  double roughness_relu = 0.0;
  double roughness_afu = 0.0;
};

// Default AFU source: the trained toy AFU for the same seed in out_dir.
std::filesystem::path default_afu_source(const ExperimentConfig& cfg);
// Throws ConfigError when no AFU source can be resolved.
SmoothnessResult smoothness_analysis(const ExperimentConfig& cfg);

// The ReLU host network and its AFU twin (same weights, every hidden
// activation replaced by `afu`).
Network smoothness_network(const ExperimentConfig& cfg);
Network with_shared_afu(const Network& relu_net, const Afu& afu);

struct MnistResult {
  RunReport report;
  Network network;
};

// Expected file names inside the MNIST directory.
struct MnistFiles {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};
MnistFiles mnist_files(const std::filesystem::path& dir);
// Throws ConfigError with a download hint when a file is missing.
void check_mnist_dir(const std::filesystem::path& dir);

MnistResult run_mnist(const ExperimentConfig& cfg);

}  // namespace afu
