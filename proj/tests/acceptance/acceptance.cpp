// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "afu/afu.hpp"
#include "afu/config.hpp"
#include "afu/data.hpp"
#include "afu/error.hpp"
#include "afu/experiments.hpp"
#include "afu/grid.hpp"
#include "afu/network.hpp"
#include "afu/optim.hpp"

namespace fs = std::filesystem;
using namespace afu;
using act::ActivationKind;

namespace {

// Post-training AFU argmin for the default toy run (seed 0), frozen after the
// first verified run.
constexpr double kToyAfuArgminGolden = 0.29999999999999982;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 1 ------------------------------------------------------------------------

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  struct Variant {
    const char* activation;  // fixed name or "afu"
    std::size_t n;
    ActivationKind base;
  };
  const Variant variants[] = {
      {"linear", 0, {}},  {"relu", 0, {}},  {"leaky_relu", 0, {}},         {"sigmoid", 0, {}},
      {"tanh", 0, {}},    {"swish", 0, {}}, {"mish", 0, {}},               {"afu", 1, ActivationKind::ReLU},
      {"afu", 1, ActivationKind::Sigmoid}, {"afu", 8, ActivationKind::ReLU}, {"afu", 8, ActivationKind::Sigmoid},
  };
  double worst = 0.0;
  std::size_t max_params = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const Variant& v = variants[i % std::size(variants)];
    Rng rng(derive_seed(2024, i));
    NetworkSpec spec;
    spec.input_dim = 2;
    const std::size_t hidden = v.n == 8 ? 2 : 3;
    spec.layers = {{hidden, v.activation, 0.0}, {hidden, v.activation, 0.0}, {1, "linear", 0.0}};
    if (v.n == 8) spec.layers.erase(spec.layers.begin() + 1);
    spec.afu = {v.n == 0 ? 1 : v.n, {v.base}, SharingScope::Network};
    Network net = Network::build(spec, rng);
    max_params = std::max(max_params, net.parameter_count());

    std::vector<Tensor> params;
    for (Tensor* t : net.parameters()) {
      for (double& x : t->data) x = rng.uniform(-1.0, 1.0);
      params.push_back(*t);
    }
    Tensor x({5, 2}, 0.0);
    for (double& e : x.data) e = rng.uniform(-2.0, 2.0);
    const std::size_t layers = net.layers().size();
    const std::size_t afus = net.afus().size();
    const ad::LossBuilder build = [&](ad::Tape& tape, std::span<const ad::TensorRef> p) {
      Network::Binding b;
      for (std::size_t l = 0; l < layers; ++l) {
        b.weights.push_back(p[2 * l]);
        b.biases.push_back(p[2 * l + 1]);
      }
      for (std::size_t a = 0; a < afus; ++a) {
        const std::size_t o = 2 * layers + 4 * a;
        b.afus.push_back({p[o], p[o + 1], p[o + 2], p[o + 3]});
      }
      const ad::TensorRef out = net.forward(b, tape.constant(x), Mode::Eval, nullptr).output;
      return ad::mean(ad::mul(out, ad::activation(out, {ActivationKind::Tanh})));
    };
    worst = std::max(worst, ad::grad_check(build, params, 1e-5));
  }
  const double secs = since(t0);
  return {worst <= 1e-4 && max_params <= 50 && secs < 30.0,
          fmt("100 networks (<= %zu params), max rel err %.3g, %.2f s", max_params, worst, secs)};
}

// 2 ------------------------------------------------------------------------

Outcome shared_accumulation() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::size_t k : {2u, 4u, 16u}) {
    Rng rng(k);
    Afu unit = Afu::create(8, {ActivationKind::ReLU}, rng);
    for (Tensor* t : unit.parameters()) {
      for (double& v : t->data) v = rng.uniform(-1.0, 1.0);
    }
    std::vector<Tensor> inputs;
    for (std::size_t s = 0; s < k; ++s) {
      Tensor z({4}, 0.0);
      for (double& v : z.data) v = rng.uniform(-3.0, 3.0);
      inputs.push_back(z);
    }
    auto site = [&](ad::Tape& tape, const Afu::Handles& h, std::size_t s) {
      const ad::TensorRef g = unit.apply(h, tape.constant(inputs[s]));
      return ad::sum(ad::mul(g, tape.constant(inputs[(s + 1) % k])));
    };
    ad::Tape shared;
    const Afu::Handles h = unit.bind(shared);
    ad::TensorRef loss = site(shared, h, 0);
    for (std::size_t s = 1; s < k; ++s) loss = ad::add(loss, site(shared, h, s));
    const ad::GradientMap g = ad::backward(shared, loss);
    const ad::TensorRef hs[] = {h.w0, h.b0, h.w1, h.b1};

    std::vector<std::vector<double>> oracle(4);
    for (std::size_t p = 0; p < 4; ++p) oracle[p].assign(hs[p].numel(), 0.0);
    for (std::size_t s = 0; s < k; ++s) {
      ad::Tape clone;
      const Afu::Handles c = unit.bind(clone);
      const ad::GradientMap gc = ad::backward(clone, site(clone, c, s));
      const ad::TensorRef cs[] = {c.w0, c.b0, c.w1, c.b1};
      for (std::size_t p = 0; p < 4; ++p) {
        for (std::size_t i = 0; i < oracle[p].size(); ++i) oracle[p][i] += gc[cs[p]][i];
      }
    }
    for (std::size_t p = 0; p < 4; ++p) {
      for (std::size_t i = 0; i < oracle[p].size(); ++i) {
        worst = std::max(worst, std::abs(g[hs[p]][i] - oracle[p][i]) / std::max(1.0, std::abs(oracle[p][i])));
      }
    }
  }
  const double secs = since(t0);
  return {worst <= 1e-12 && secs < 5.0, fmt("k in {2,4,16}, max rel err %.3g, %.3f s", worst, secs)};
}

// 3 ------------------------------------------------------------------------

Outcome parameter_count() {
  Rng rng(0);
  std::string detail;
  bool ok = true;
  for (std::size_t n : {1u, 8u, 128u}) {
    const Afu unit = Afu::create(n, {ActivationKind::ReLU}, rng);
    ok = ok && unit.parameter_count() == 3 * n + 1 && unit.flat().size() == 3 * n + 1;
    detail += fmt("N=%zu -> %zu  ", n, unit.flat().size());
  }
  return {ok, detail};
}

// 4, 5 ---------------------------------------------------------------------

struct ToyRuns {
  std::optional<ToyResult> afu, relu;
  double seconds = 0.0;
  std::string error;
};

ToyRuns run_toys(const fs::path& work) {
  ToyRuns runs;
  const auto t0 = Clock::now();
  try {
    ExperimentConfig cfg = default_config(ExperimentKind::Toy);
    cfg.out_dir = work / "toy";
    runs.afu = run_toy(cfg);
    cfg.network.layers[0].activation = "relu";
    runs.relu = run_toy(cfg);
  } catch (const std::exception& e) {
    runs.error = e.what();
  }
  runs.seconds = since(t0);
  return runs;
}

Outcome toy_parity(const ToyRuns& runs) {
  if (!runs.afu || !runs.relu) return {false, "toy runs failed: " + runs.error};
  const double a = runs.afu->report.final_train_accuracy;
  const double r = runs.relu->report.final_train_accuracy;
  const double gap = std::abs(a - r);
  return {a >= 0.95 && r >= 0.95 && gap <= 0.02 && runs.seconds < 60.0,
          fmt("seed 0: AFU %.4f (%zu epochs), ReLU %.4f (%zu epochs), gap %.4f, %.1f s", a,
              runs.afu->report.epochs.size(), r, runs.relu->report.epochs.size(), gap, runs.seconds)};
}

Outcome toy_afu_shape(const ToyRuns& runs, const fs::path& work) {
  if (!runs.afu) return {false, "toy AFU run failed: " + runs.error};
  // Read the emitted curve back so the check covers the file itself.
  std::ifstream in(work / "toy" / "toy-afu8-relu_s0_afu_after.csv");
  std::string line;
  std::getline(in, line);
  std::vector<CurvePoint> curve;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    curve.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
  }
  if (curve.size() != 201) return {false, fmt("curve has %zu points", curve.size())};
  bool up = true, down = true;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    up = up && curve[i].g >= curve[i - 1].g;
    down = down && curve[i].g <= curve[i - 1].g;
  }
  const auto lo = std::min_element(curve.begin(), curve.end(),
                                   [](const CurvePoint& a, const CurvePoint& b) { return a.g < b.g; });
  const bool golden = std::abs(lo->z - kToyAfuArgminGolden) <= 1e-12;
  return {!(up || down) && std::abs(lo->z) < 1.0 && golden,
          fmt("non-monotone %s, argmin z=%.6g (golden %.6g), g=%.6g", (up || down) ? "no" : "yes", lo->z,
              kToyAfuArgminGolden, lo->g)};
}

// 6, 7 ---------------------------------------------------------------------

struct MnistRuns {
  std::optional<MnistResult> relu, shared, per_layer;
  double seconds = 0.0;
  std::string error;
};

MnistRuns run_mnists(const fs::path& mnist_dir, const fs::path& work) {
  MnistRuns runs;
  const auto t0 = Clock::now();
  try {
    ExperimentConfig cfg = default_config(ExperimentKind::Mnist);
    cfg.mnist_dir = mnist_dir;
    cfg.out_dir = work / "mnist";
    ExperimentConfig relu = cfg;
    for (std::size_t l = 0; l < relu.network.layers.size(); ++l) {
      relu.network.layers[l].activation = l + 1 == relu.network.layers.size() ? "linear" : "relu";
    }
    runs.relu = run_mnist(relu);
    runs.shared = run_mnist(cfg);
    cfg.network.afu.scope = SharingScope::PerLayer;
    runs.per_layer = run_mnist(cfg);
  } catch (const std::exception& e) {
    runs.error = e.what();
  }
  runs.seconds = since(t0);
  return runs;
}

Outcome mnist_parity(const MnistRuns& runs) {
  if (!runs.relu || !runs.shared) return {false, "MNIST runs failed: " + runs.error};
  const double r = runs.relu->report.final_test_accuracy.value_or(0.0);
  const double s = runs.shared->report.final_test_accuracy.value_or(0.0);
  const double gap = std::abs(r - s);
  return {r >= 0.93 && s >= 0.93 && gap <= 0.02 && runs.seconds < 600.0,
          fmt("test acc ReLU %.4f, shared AFU %.4f, gap %.4f, %.1f s for all three runs", r, s, gap, runs.seconds)};
}

Outcome per_layer_divergence(const MnistRuns& runs) {
  if (!runs.per_layer) return {false, "per_layer MNIST run failed: " + runs.error};
  const auto& afus = runs.per_layer->network.afus();
  if (afus.size() != 3) return {false, fmt("%zu AFUs, expected 3", afus.size())};
  double min_gap = INFINITY;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = a + 1; b < 3; ++b) {
      const auto ka = afus[a].flat(), kb = afus[b].flat();
      double gap = 0.0;
      for (std::size_t i = 0; i < ka.size(); ++i) gap = std::max(gap, std::abs(ka[i] - kb[i]));
      min_gap = std::min(min_gap, gap);
    }
  }
  std::vector<std::string> curves;
  for (const fs::path& p : runs.per_layer->report.manifest) {
    if (p.filename().string().find("_curve.csv") != std::string::npos) curves.push_back(slurp(p));
  }
  const bool distinct_files = curves.size() == 3 && curves[0] != curves[1] && curves[0] != curves[2] &&
                              curves[1] != curves[2];
  return {min_gap > 1e-6 && distinct_files,
          fmt("min pairwise max|dkappa| %.4g, %zu distinct curve files", min_gap, distinct_files ? curves.size() : 0)};
}

// 8 ------------------------------------------------------------------------

Outcome scheduler_law() {
  const optim::LrSchedule s{1.0, 0.7};
  const double expected[] = {1.0, 0.7, 0.49, 0.343};
  bool ok = true;
  std::string detail;
  for (long e = 0; e < 4; ++e) {
    ok = ok && s.multiplier(e) == expected[e];
    detail += fmt("%.17g ", s.multiplier(e));
  }
  return {ok, detail};
}

// 9 ------------------------------------------------------------------------

Outcome smoothness_tool(const fs::path& work) {
  const auto t0 = Clock::now();
  try {
    ExperimentConfig cfg = default_config(ExperimentKind::Smoothness);
    cfg.afu_path = work / "toy" / "toy-afu8-relu_s0_afu.json";
    cfg.out_dir = work / "smooth";
    const SmoothnessResult a = smoothness_analysis(cfg);
    std::vector<std::string> first;
    for (const fs::path& p : a.report.manifest) first.push_back(slurp(p));
    const SmoothnessResult b = smoothness_analysis(cfg);
    bool identical = a.report.manifest == b.report.manifest;
    for (std::size_t i = 0; identical && i < first.size(); ++i) {
      identical = slurp(b.report.manifest[i]) == first[i];
    }
    const bool sizes = a.relu_field.values.size() == 201u * 201u && a.afu_field.values.size() == 201u * 201u;
    const bool files = fs::exists(work / "smooth" / "smooth_s0_relu_field.csv") &&
                       fs::exists(work / "smooth" / "smooth_s0_afu_field.csv");
    const bool pair = std::isfinite(a.roughness_relu) && std::isfinite(a.roughness_afu);

    const act::ActivationSpec linear{ActivationKind::Linear};
    const Network constant({DenseLayer{Tensor({1, 2}, 0.0), Tensor({1}, 1.25), linear, 0.0}}, {},
                           SharingScope::Network);
    const Network x0({DenseLayer{Tensor::matrix(1, 2, {1.0, 0.0}), Tensor({1}, 0.0), linear, 0.0}}, {},
                     SharingScope::Network);
    const double r_const = roughness(score_field(constant, GridSpec{}));
    // Dyadic lattice (step 1/32) so the grid coordinates themselves are exact.
    const double r_lin = roughness(score_field(x0, GridSpec{-3, 3, -3, 3, 193}));
    const double secs = since(t0);
    return {identical && sizes && files && pair && r_const == 0.0 && r_lin == 0.0 && secs < 60.0,
            fmt("roughness relu %.6g, afu %.6g; reruns %s; constant %g, linear %g; %.1f s", a.roughness_relu,
                a.roughness_afu, identical ? "byte-identical" : "DIFFER", r_const, r_lin, secs)};
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
}

// 10 -----------------------------------------------------------------------

Outcome data_layer(const fs::path& work) {
  bool balanced = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto ds = data::gen_xor_toy({0.5, seed});
    const auto pos = std::count(ds.labels().begin(), ds.labels().end(), 1);
    const auto neg = std::count(ds.labels().begin(), ds.labels().end(), -1);
    balanced = balanced && pos == 1000 && neg == 1000;
  }

  const fs::path dir = work / "idx";
  fs::create_directories(dir);
  std::vector<std::uint8_t> px(7 * 28 * 28), lab(7);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>((i * 131 + 7) % 256);
  for (std::size_t i = 0; i < lab.size(); ++i) lab[i] = static_cast<std::uint8_t>((i * 3) % 10);
  data::write_mnist_idx(dir / "img", dir / "lab", 28, 28, px, lab);
  const auto ds = data::load_mnist_idx(dir / "img", dir / "lab");
  bool round_trip = ds.size() == 7 && ds.feature_dim() == 784;
  for (std::size_t i = 0; round_trip && i < px.size(); ++i) {
    round_trip = ds.features().data[i] == px[i] / 255.0 &&
                 static_cast<std::uint8_t>(std::lround(ds.features().data[i] * 255.0)) == px[i];
  }
  for (std::size_t i = 0; round_trip && i < lab.size(); ++i) round_trip = ds.labels()[i] == lab[i];

  std::string bytes = slurp(dir / "img");
  bytes[2] = 0x09;
  std::ofstream(dir / "bad", std::ios::binary) << bytes;
  bool rejected = false;
  try {
    data::load_mnist_idx(dir / "bad", dir / "lab");
  } catch (const FormatError&) {
    rejected = true;
  }
  return {balanced && round_trip && rejected,
          fmt("1000/1000 for 100 seeds: %s; IDX round trip: %s; bad magic -> FormatError: %s", balanced ? "yes" : "no",
              round_trip ? "exact" : "MISMATCH", rejected ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string mnist_dir = std::getenv("AFU_MNIST_DIR") ? std::getenv("AFU_MNIST_DIR") : "";
  std::string work = (fs::temp_directory_path() / "afu_acceptance").string();
  app.add_option("--mnist-dir", mnist_dir, "Directory with the MNIST IDX files");
  app.add_option("--work-dir", work, "Scratch directory for emitted files");
  CLI11_PARSE(app, argc, argv);
  if (mnist_dir.empty()) mnist_dir = std::getenv("AFU_MNIST_DIR") ? std::getenv("AFU_MNIST_DIR") : "";

  fs::remove_all(work);
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](int id, const char* title, const Outcome& o) {
    std::printf("[%s] %2d %-32s %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [](const std::function<Outcome()>& f) -> Outcome {
    try {
      return f();
    } catch (const std::exception& e) {
      return {false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "gradient oracle", guarded(gradient_oracle));
  report(2, "shared-parameter accumulation", guarded(shared_accumulation));
  report(3, "AFU parameter count", guarded(parameter_count));
  const ToyRuns toys = run_toys(work);
  report(4, "toy parity", guarded([&] { return toy_parity(toys); }));
  report(5, "toy AFU shape", guarded([&] { return toy_afu_shape(toys, work); }));
  const MnistRuns mnist = run_mnists(mnist_dir, work);
  report(6, "MNIST desk-scale parity", guarded([&] { return mnist_parity(mnist); }));
  report(7, "per-layer AFU divergence", guarded([&] { return per_layer_divergence(mnist); }));
  report(8, "scheduler law", guarded(scheduler_law));
  report(9, "smoothness tool", guarded([&] { return smoothness_tool(work); }));
  report(10, "data layer", guarded([&] { return data_layer(work); }));

  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
