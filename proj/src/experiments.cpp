#include "afu/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <variant>

#include "afu/error.hpp"
#include "afu/losses.hpp"
#include "afu/optim.hpp"

namespace afu {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

enum Stream : std::uint64_t { kInit = 1, kDropout = 2, kTrainSubset = 3, kTestSubset = 4, kRandomAfu = 5 };
constexpr std::uint64_t kShuffleStream = 100;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool uses_afu(const NetworkSpec& spec) {
  return std::any_of(spec.layers.begin(), spec.layers.end(), [](const LayerSpec& l) { return l.activation == "afu"; });
}

fs::path record(RunReport& report, fs::path path) {
  report.manifest.push_back(path);
  return path;
}

void prepare_out_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.out_dir.string() + ": " + ec.message());
}

ordered_json afu_json(const Afu& afu) {
  return {{"hidden_units", afu.hidden_units()}, {"base", act::name(afu.base())}, {"kappa", afu.flat()}};
}

// Sampled argmin of a curve (first index on ties).
CurvePoint curve_argmin(const std::vector<CurvePoint>& curve) {
  return *std::min_element(curve.begin(), curve.end(),
                           [](const CurvePoint& a, const CurvePoint& b) { return a.g < b.g; });
}

bool is_monotone(const std::vector<CurvePoint>& curve) {
  bool up = true, down = true;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    up = up && curve[i].g >= curve[i - 1].g;
    down = down && curve[i].g <= curve[i - 1].g;
  }
  return up || down;
}

}  // namespace

ordered_json report_json(const RunReport& r) {
  ordered_json j;
  j["tag"] = r.tag;
  j["seed"] = r.seed;
  j["initial_loss"] = r.initial_loss;
  ordered_json epochs = ordered_json::array();
  for (const auto& e : r.epochs) {
    ordered_json row{{"epoch", e.epoch}, {"lr_multiplier", e.lr_multiplier}, {"train_loss", e.train_loss}};
    if (e.train_accuracy) row["train_accuracy"] = *e.train_accuracy;
    if (e.test_accuracy) row["test_accuracy"] = *e.test_accuracy;
    epochs.push_back(std::move(row));
  }
  j["epochs"] = std::move(epochs);
  j["final_train_accuracy"] = r.final_train_accuracy;
  if (r.final_test_accuracy) j["final_test_accuracy"] = *r.final_test_accuracy;
  j["extras"] = r.extras;
  ordered_json files = ordered_json::array();
  for (const auto& p : r.manifest) files.push_back(p.filename().string());
  j["manifest"] = std::move(files);
  j["config"] = r.config;
  return j;
}

void write_report(const RunReport& report, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << report_json(report).dump(2) << '\n';
}

TrainLog train(Network& net, const data::Dataset& train_set, const ExperimentConfig& cfg,
               const data::Dataset* test_set) {
  cfg.schedule.validate();
  std::vector<Tensor*> params = net.parameters();
  std::optional<optim::Adam> adam;
  std::optional<optim::AdaDelta> adadelta;
  if (cfg.optim.kind == "adam") {
    adam.emplace(optim::AdamConfig{cfg.optim.lr, cfg.optim.beta1, cfg.optim.beta2, cfg.optim.eps}, params);
  } else if (cfg.optim.kind == "adadelta") {
    adadelta.emplace(optim::AdaDeltaConfig{cfg.optim.rho, cfg.optim.eps}, params);
  } else {
    throw ConfigError("unknown optimizer '" + cfg.optim.kind + "'");
  }

  const bool full_batch = cfg.batch_size == 0 || cfg.batch_size >= train_set.size();
  const bool track_train_accuracy = cfg.early_stop_accuracy <= 1.0;
  Rng dropout_rng(derive_seed(cfg.seed, kDropout));

  std::vector<std::size_t> all(train_set.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  TrainLog log;
  bool first = true;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr_multiplier = cfg.schedule.multiplier(static_cast<long>(epoch));
    const auto plan = full_batch ? std::vector<std::vector<std::size_t>>{all}
                                 : data::batches(train_set.size(), cfg.batch_size,
                                                 derive_seed(cfg.seed, kShuffleStream + epoch));
    double loss_sum = 0.0;
    try {
      for (const auto& idx : plan) {
        ad::Tape tape;
        const Network::Binding binding = net.bind(tape);
        const ad::TensorRef x = tape.constant(train_set.gather_features(idx));
        const Network::Trace trace = net.forward(binding, x, Mode::Train, &dropout_rng);
        const std::vector<int> y = train_set.gather_labels(idx);
        const ad::TensorRef loss = loss::batch_loss(cfg.loss, trace.output, y);
        const double value = tape.value(loss)[0];
        if (!std::isfinite(value)) throw NumericError("non-finite loss");
        if (first) {
          log.initial_loss = value;
          first = false;
        }
        loss_sum += value * static_cast<double>(idx.size());

        const ad::GradientMap grads = ad::backward(tape, loss);
        std::vector<Tensor> g;
        for (const ad::TensorRef& p : binding.all()) g.push_back(grads[p]);
        if (adam) {
          adam->step(g, rec.lr_multiplier);
        } else {
          adadelta->step(g, rec.lr_multiplier);
        }
      }
    } catch (const NumericError& e) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    if (track_train_accuracy) rec.train_accuracy = accuracy(net, train_set);
    if (test_set) rec.test_accuracy = accuracy(net, *test_set);
    log.epochs.push_back(rec);
    if (track_train_accuracy && *rec.train_accuracy >= cfg.early_stop_accuracy) break;
  }
  return log;
}

std::string run_tag(const ExperimentConfig& cfg) {
  const NetworkSpec& net = cfg.network;
  std::string tag;
  switch (cfg.experiment) {
    case ExperimentKind::Toy:
      if (uses_afu(net)) {
        tag = "toy-afu" + std::to_string(net.afu.hidden_units) + "-" + std::string(act::name(net.afu.base));
      } else {
        tag = "toy-" + net.layers.front().activation;
      }
      break;
    case ExperimentKind::Mnist:
      tag = uses_afu(net) ? "mnist-afu-" + std::string(scope_name(net.afu.scope))
                          : "mnist-" + net.layers.front().activation;
      break;
    case ExperimentKind::Smoothness:
      tag = "smooth";
      break;
  }
  return tag + "_s" + std::to_string(cfg.seed);
}

fs::path output_path(const ExperimentConfig& cfg, const std::string& what) {
  return cfg.out_dir / (run_tag(cfg) + "_" + what);
}

ToyResult run_toy(const ExperimentConfig& cfg) {
  if (cfg.network.input_dim != 2) throw ConfigError("toy experiment needs a 2-input network");
  if (cfg.loss != loss::LossKind::Hinge) throw ConfigError("toy experiment uses the hinge loss");
  prepare_out_dir(cfg);
  const auto t0 = std::chrono::steady_clock::now();

  const data::Dataset ds = data::gen_xor_toy({cfg.toy_sigma, cfg.seed});
  Rng init(derive_seed(cfg.seed, kInit));
  Network net = Network::build(cfg.network, init);
  std::optional<Afu> before;
  if (!net.afus().empty()) before = net.afus().front();

  RunReport report;
  report.tag = run_tag(cfg);
  report.seed = cfg.seed;
  report.config = to_json(cfg);

  const TrainLog log = train(net, ds, cfg);
  report.initial_loss = log.initial_loss;
  report.epochs = log.epochs;
  report.final_train_accuracy = accuracy(net, ds);

  const GridField field = score_field(net, cfg.field_grid);
  write_field_csv(field, record(report, output_path(cfg, "boundary_field.csv")));
  const std::vector<Polyline> lines = boundary_extract(field, 0.0);
  write_polylines_csv(lines, record(report, output_path(cfg, "boundary_lines.csv")));

  ordered_json centres = ordered_json::array();
  const double cx[4][2] = {{-1, -1}, {1, 1}, {-1, 1}, {1, -1}};
  const int cy[4] = {1, 1, -1, -1};
  Tensor pts({4, 2}, 0.0);
  for (std::size_t c = 0; c < 4; ++c) {
    pts.at(c, 0) = cx[c][0];
    pts.at(c, 1) = cx[c][1];
  }
  const Tensor centre_scores = net.predict(pts);
  bool centres_ok = true;
  for (std::size_t c = 0; c < 4; ++c) {
    const double s = centre_scores[c];
    const bool ok = (s >= 0 ? 1 : -1) == cy[c];
    centres_ok = centres_ok && ok;
    centres.push_back({{"x0", cx[c][0]}, {"x1", cx[c][1]}, {"label", cy[c]}, {"score", s}});
  }
  report.extras["boundary_polylines"] = lines.size();
  report.extras["centre_scores"] = std::move(centres);
  report.extras["centres_separated"] = centres_ok;

  if (before) {
    const Afu& after = net.afus().front();
    const auto curve_before = before->sample(cfg.curve_min, cfg.curve_max, cfg.curve_points);
    const auto curve_after = after.sample(cfg.curve_min, cfg.curve_max, cfg.curve_points);
    write_curve_csv(curve_before, record(report, output_path(cfg, "afu_before.csv")));
    write_curve_csv(curve_after, record(report, output_path(cfg, "afu_after.csv")));
    save_afu(after, record(report, output_path(cfg, "afu.json")));
    const CurvePoint lo = curve_argmin(curve_after);
    report.extras["afu_argmin_z"] = lo.z;
    report.extras["afu_min_g"] = lo.g;
    report.extras["afu_monotone"] = is_monotone(curve_after);
  }

  const std::size_t hidden = net.layers().front().out();
  for (std::size_t n = 0; n < hidden; ++n) {
    const GridField map = neuron_activation_map(net, 0, n, cfg.field_grid);
    write_field_csv(map, record(report, output_path(cfg, "neuron" + std::to_string(n) + ".csv")));
  }
  const auto stats = activation_stats(net, ds);
  if (!stats.empty()) report.extras["dead_fraction_layer0"] = stats.front();

  report.wall_clock_seconds = seconds_since(t0);
  const fs::path report_path = output_path(cfg, "report.json");
  report.manifest.push_back(report_path);
  write_report(report, report_path);
  return {std::move(report), std::move(net), std::move(before)};
}

Network smoothness_network(const ExperimentConfig& cfg) {
  NetworkSpec spec;
  spec.input_dim = 2;
  spec.layers.assign(cfg.depth, LayerSpec{cfg.width, "relu", 0.0});
  spec.layers.push_back({1, "linear", 0.0});
  Rng init(derive_seed(cfg.seed, kInit));
  return Network::build(spec, init);
}

Network with_shared_afu(const Network& relu_net, const Afu& afu) {
  std::vector<DenseLayer> layers = relu_net.layers();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) layers[l].activation = AfuBinding{{0}};
  return Network(std::move(layers), {afu}, SharingScope::Network);
}

fs::path default_afu_source(const ExperimentConfig& cfg) {
  return cfg.out_dir / ("toy-afu8-relu_s" + std::to_string(cfg.seed) + "_afu.json");
}

SmoothnessResult smoothness_analysis(const ExperimentConfig& cfg) {
  if (cfg.depth == 0 || cfg.width == 0) throw ConfigError("smoothness network needs depth and width >= 1");
  prepare_out_dir(cfg);
  const auto t0 = std::chrono::steady_clock::now();

  std::optional<Afu> afu;
  std::string source;
  if (cfg.random_afu) {
    Rng rng(derive_seed(cfg.seed, kRandomAfu));
    afu = Afu::create(cfg.network.afu.hidden_units, cfg.network.afu.base, rng);
    source = "random";
  } else {
    const fs::path path = cfg.afu_path.empty() ? default_afu_source(cfg) : cfg.afu_path;
    if (!fs::exists(path)) {
      throw ConfigError("missing AFU source " + path.string() +
                        " (run train-toy first, pass --afu PATH, or use --random-afu)");
    }
    afu = load_afu(path);
    source = path.filename().string();
  }

  const Network relu_net = smoothness_network(cfg);
  const Network afu_net = with_shared_afu(relu_net, *afu);

  SmoothnessResult res;
  res.report.tag = run_tag(cfg);
  res.report.seed = cfg.seed;
  res.report.config = to_json(cfg);
  res.relu_field = score_field(relu_net, cfg.field_grid);
  res.afu_field = score_field(afu_net, cfg.field_grid);
  res.roughness_relu = roughness(res.relu_field);
  res.roughness_afu = roughness(res.afu_field);
  write_field_csv(res.relu_field, record(res.report, output_path(cfg, "relu_field.csv")));
  write_field_csv(res.afu_field, record(res.report, output_path(cfg, "afu_field.csv")));
  res.report.extras["afu_source"] = source;
  res.report.extras["afu"] = afu_json(*afu);
  res.report.extras["roughness_relu"] = res.roughness_relu;
  res.report.extras["roughness_afu"] = res.roughness_afu;

  res.report.wall_clock_seconds = seconds_since(t0);
  const fs::path report_path = output_path(cfg, "report.json");
  res.report.manifest.push_back(report_path);
  write_report(res.report, report_path);
  return res;
}

MnistFiles mnist_files(const fs::path& dir) {
  return {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", dir / "t10k-images-idx3-ubyte",
          dir / "t10k-labels-idx1-ubyte"};
}

void check_mnist_dir(const fs::path& dir) {
  if (dir.empty()) {
    throw ConfigError("no MNIST directory: set AFU_MNIST_DIR or pass --mnist-dir (expects the four uncompressed "
                      "IDX files, e.g. from https://registry.npmjs.org/mnist-data/-/mnist-data-1.2.6.tgz)");
  }
  const MnistFiles f = mnist_files(dir);
  for (const fs::path& p : {f.train_images, f.train_labels, f.test_images, f.test_labels}) {
    if (!fs::exists(p)) {
      throw ConfigError("missing MNIST file " + p.string() +
                        " (download the uncompressed IDX files, e.g. from "
                        "https://registry.npmjs.org/mnist-data/-/mnist-data-1.2.6.tgz)");
    }
  }
}

MnistResult run_mnist(const ExperimentConfig& cfg) {
  if (cfg.network.input_dim != 784 || cfg.network.layers.empty() || cfg.network.layers.back().units != 10) {
    throw ConfigError("MNIST experiment needs a 784-input, 10-output network");
  }
  check_mnist_dir(cfg.mnist_dir);
  prepare_out_dir(cfg);
  const auto t0 = std::chrono::steady_clock::now();

  const MnistFiles files = mnist_files(cfg.mnist_dir);
  const data::Dataset full_train = data::load_mnist_idx(files.train_images, files.train_labels);
  const data::Dataset full_test = data::load_mnist_idx(files.test_images, files.test_labels);
  const data::Dataset train_set = data::subset(full_train, cfg.train_subset, derive_seed(cfg.seed, kTrainSubset));
  const data::Dataset test_set = data::subset(full_test, cfg.test_subset, derive_seed(cfg.seed, kTestSubset));

  Rng init(derive_seed(cfg.seed, kInit));
  Network net = Network::build(cfg.network, init);

  RunReport report;
  report.tag = run_tag(cfg);
  report.seed = cfg.seed;
  report.config = to_json(cfg);
  const TrainLog log = train(net, train_set, cfg, &test_set);
  report.initial_loss = log.initial_loss;
  report.epochs = log.epochs;
  report.final_train_accuracy = accuracy(net, train_set);
  report.final_test_accuracy = log.epochs.back().test_accuracy;

  ordered_json afus = ordered_json::array();
  for (std::size_t a = 0; a < net.afus().size(); ++a) {
    const Afu& afu = net.afus()[a];
    const std::string what = net.afus().size() == 1 ? "afu" : "afu" + std::to_string(a);
    write_curve_csv(afu.sample(cfg.curve_min, cfg.curve_max, cfg.curve_points),
                    record(report, output_path(cfg, what + "_curve.csv")));
    save_afu(afu, record(report, output_path(cfg, what + ".json")));
    afus.push_back(afu_json(afu));
  }
  if (!afus.empty()) report.extras["afus"] = std::move(afus);

  report.wall_clock_seconds = seconds_since(t0);
  const fs::path report_path = output_path(cfg, "report.json");
  report.manifest.push_back(report_path);
  write_report(report, report_path);
  return {std::move(report), std::move(net)};
}

}  // namespace afu
