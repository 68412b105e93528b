#include "afu/config.hpp"

#include <fstream>
#include <set>

#include "afu/error.hpp"

namespace afu {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Toy: return "toy";
    case ExperimentKind::Mnist: return "mnist";
    case ExperimentKind::Smoothness: return "smoothness";
  }
  return "?";
}

ExperimentKind parse_experiment(std::string_view name) {
  if (name == "toy") return ExperimentKind::Toy;
  if (name == "mnist") return ExperimentKind::Mnist;
  if (name == "smoothness") return ExperimentKind::Smoothness;
  throw ConfigError("unknown experiment '" + std::string(name) + "'; valid: toy, mnist, smoothness");
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  switch (kind) {
    case ExperimentKind::Toy:
      c.network.input_dim = 2;
      c.network.layers = {{4, "afu", 0.0}, {1, "linear", 0.0}};
      break;
    case ExperimentKind::Mnist:
      c.network.input_dim = 784;
      c.network.layers = {{256, "afu", 0.25}, {128, "afu", 0.5}, {10, "afu", 0.0}};
      c.loss = loss::LossKind::NegativeLogLikelihood;
      c.optim.kind = "adadelta";
      c.optim.eps = 1e-6;
      c.schedule = {1.0, 0.7};
      c.epochs = 3;
      c.batch_size = 64;
      c.early_stop_accuracy = 2.0;  // never
      break;
    case ExperimentKind::Smoothness:
      c.network.input_dim = 2;
      c.network.layers.assign(c.depth, LayerSpec{c.width, "relu", 0.0});
      c.network.layers.push_back({1, "linear", 0.0});
      c.epochs = 1;
      break;
  }
  return c;
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown config key '" + std::string(where) + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  try {
    reject_unknown(j, {"experiment", "seed", "network", "afu", "loss", "optim", "schedule", "epochs", "batch_size",
                       "early_stop_accuracy", "data", "smoothness", "grid", "curve", "out_dir"},
                   "config");
    const auto kind = parse_experiment(j.value("experiment", std::string("toy")));
    ExperimentConfig c = default_config(kind);
    read(j, "seed", c.seed);

    if (j.contains("network")) {
      const json& n = j["network"];
      reject_unknown(n, {"input_dim", "layers"}, "network");
      read(n, "input_dim", c.network.input_dim);
      if (n.contains("layers")) {
        c.network.layers.clear();
        for (const json& l : n["layers"]) {
          reject_unknown(l, {"units", "activation", "dropout"}, "network.layers[]");
          LayerSpec ls;
          read(l, "units", ls.units);
          read(l, "activation", ls.activation);
          read(l, "dropout", ls.dropout);
          if (ls.activation != "afu") act::parse_or_throw(ls.activation);
          c.network.layers.push_back(ls);
        }
      }
    }
    if (j.contains("afu")) {
      const json& a = j["afu"];
      reject_unknown(a, {"hidden_units", "base", "scope"}, "afu");
      read(a, "hidden_units", c.network.afu.hidden_units);
      if (a.contains("base")) c.network.afu.base = act::parse_or_throw(a["base"].get<std::string>());
      if (a.contains("scope")) c.network.afu.scope = parse_scope(a["scope"].get<std::string>());
    }
    if (j.contains("loss")) c.loss = loss::parse(j["loss"].get<std::string>());
    if (j.contains("optim")) {
      const json& o = j["optim"];
      reject_unknown(o, {"kind", "lr", "beta1", "beta2", "eps", "rho"}, "optim");
      read(o, "kind", c.optim.kind);
      if (c.optim.kind != "adam" && c.optim.kind != "adadelta") {
        throw ConfigError("unknown optimizer '" + c.optim.kind + "'; valid: adam, adadelta");
      }
      if (!o.contains("eps")) c.optim.eps = c.optim.kind == "adam" ? 1e-8 : 1e-6;
      read(o, "lr", c.optim.lr);
      read(o, "beta1", c.optim.beta1);
      read(o, "beta2", c.optim.beta2);
      read(o, "eps", c.optim.eps);
      read(o, "rho", c.optim.rho);
    }
    if (j.contains("schedule")) {
      const json& s = j["schedule"];
      reject_unknown(s, {"base_lr", "gamma"}, "schedule");
      read(s, "base_lr", c.schedule.base_lr);
      read(s, "gamma", c.schedule.gamma);
    }
    c.schedule.validate();
    read(j, "epochs", c.epochs);
    read(j, "batch_size", c.batch_size);
    read(j, "early_stop_accuracy", c.early_stop_accuracy);
    if (c.epochs == 0) throw ConfigError("epochs must be at least 1");

    if (j.contains("data")) {
      const json& d = j["data"];
      reject_unknown(d, {"sigma", "mnist_dir", "train_subset", "test_subset"}, "data");
      read(d, "sigma", c.toy_sigma);
      if (d.contains("mnist_dir")) c.mnist_dir = d["mnist_dir"].get<std::string>();
      read(d, "train_subset", c.train_subset);
      read(d, "test_subset", c.test_subset);
    }
    if (j.contains("smoothness")) {
      const json& s = j["smoothness"];
      reject_unknown(s, {"afu_path", "random_afu", "depth", "width"}, "smoothness");
      if (s.contains("afu_path")) c.afu_path = s["afu_path"].get<std::string>();
      read(s, "random_afu", c.random_afu);
      read(s, "depth", c.depth);
      read(s, "width", c.width);
      if (kind == ExperimentKind::Smoothness && !j.contains("network")) {
        c.network.layers.assign(c.depth, LayerSpec{c.width, "relu", 0.0});
        c.network.layers.push_back({1, "linear", 0.0});
      }
    }
    if (j.contains("grid")) {
      const json& g = j["grid"];
      reject_unknown(g, {"min", "max", "resolution"}, "grid");
      double lo = c.field_grid.x0_min, hi = c.field_grid.x0_max;
      read(g, "min", lo);
      read(g, "max", hi);
      read(g, "resolution", c.field_grid.resolution);
      c.field_grid.x0_min = c.field_grid.x1_min = lo;
      c.field_grid.x0_max = c.field_grid.x1_max = hi;
    }
    if (j.contains("curve")) {
      const json& g = j["curve"];
      reject_unknown(g, {"min", "max", "points"}, "curve");
      read(g, "min", c.curve_min);
      read(g, "max", c.curve_max);
      read(g, "points", c.curve_points);
    }
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const RangeError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

ordered_json to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["experiment"] = experiment_name(c.experiment);
  j["seed"] = c.seed;
  ordered_json layers = ordered_json::array();
  for (const auto& l : c.network.layers) {
    layers.push_back({{"units", l.units}, {"activation", l.activation}, {"dropout", l.dropout}});
  }
  j["network"] = {{"input_dim", c.network.input_dim}, {"layers", layers}};
  j["afu"] = {{"hidden_units", c.network.afu.hidden_units},
              {"base", act::name(c.network.afu.base)},
              {"scope", scope_name(c.network.afu.scope)}};
  j["loss"] = loss::name(c.loss);
  j["optim"] = {{"kind", c.optim.kind}, {"lr", c.optim.lr},   {"beta1", c.optim.beta1},
                {"beta2", c.optim.beta2}, {"eps", c.optim.eps}, {"rho", c.optim.rho}};
  j["schedule"] = {{"base_lr", c.schedule.base_lr}, {"gamma", c.schedule.gamma}};
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["early_stop_accuracy"] = c.early_stop_accuracy;
  j["data"] = {{"sigma", c.toy_sigma},
               {"mnist_dir", c.mnist_dir.string()},
               {"train_subset", c.train_subset},
               {"test_subset", c.test_subset}};
  j["smoothness"] = {
      {"afu_path", c.afu_path.string()}, {"random_afu", c.random_afu}, {"depth", c.depth}, {"width", c.width}};
  j["grid"] = {{"min", c.field_grid.x0_min}, {"max", c.field_grid.x0_max}, {"resolution", c.field_grid.resolution}};
  j["curve"] = {{"min", c.curve_min}, {"max", c.curve_max}, {"points", c.curve_points}};
  j["out_dir"] = c.out_dir.string();
  return j;
}

}  // namespace afu
