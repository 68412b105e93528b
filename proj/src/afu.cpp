#include "afu/afu.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "afu/error.hpp"

namespace afu {

using nlohmann::ordered_json;

std::string_view scope_name(SharingScope scope) {
  switch (scope) {
    case SharingScope::Network: return "network";
    case SharingScope::PerLayer: return "per_layer";
    case SharingScope::PerNeuron: return "per_neuron";
  }
  return "?";
}

SharingScope parse_scope(std::string_view name) {
  if (name == "network") return SharingScope::Network;
  if (name == "per_layer") return SharingScope::PerLayer;
  if (name == "per_neuron") return SharingScope::PerNeuron;
  throw ConfigError("unknown AFU scope '" + std::string(name) + "'; valid: network, per_layer, per_neuron");
}

Afu::Afu(act::ActivationSpec base, std::vector<double> w0, std::vector<double> b0, std::vector<double> w1,
         double b1)
    : base_(base) {
  const std::size_t n = w0.size();
  if (n == 0) throw RangeError("AFU needs at least one hidden unit");
  if (b0.size() != n || w1.size() != n) {
    throw ShapeError("AFU parameter lengths differ: w0=" + std::to_string(n) + " b0=" +
                     std::to_string(b0.size()) + " w1=" + std::to_string(w1.size()));
  }
  w0_t_ = Tensor(Shape{1, n}, std::move(w0));
  b0_t_ = Tensor(Shape{n}, std::move(b0));
  w1_t_ = Tensor(Shape{n, 1}, std::move(w1));
  b1_t_ = Tensor::scalar(b1);
  for (const Tensor* t : parameters()) {
    if (!t->all_finite()) throw NumericError("AFU parameters must be finite");
  }
}

Afu Afu::create(std::size_t hidden_units, act::ActivationSpec base, Rng& rng) {
  if (hidden_units == 0) throw RangeError("AFU hidden width must be at least 1");
  const double a = std::sqrt(6.0 / static_cast<double>(hidden_units + 1));
  std::vector<double> w0(hidden_units), w1(hidden_units);
  for (auto& w : w0) w = rng.uniform(-a, a);
  for (auto& w : w1) w = rng.uniform(-a, a);
  return Afu(base, std::move(w0), std::vector<double>(hidden_units, 0.0), std::move(w1), 0.0);
}

Afu Afu::from_values(act::ActivationSpec base, std::vector<double> w0, std::vector<double> b0,
                     std::vector<double> w1, double b1) {
  return Afu(base, std::move(w0), std::move(b0), std::move(w1), b1);
}

double Afu::operator()(double z) const {
  if (!std::isfinite(z)) throw NumericError("AFU input is not finite");
  double g = 0.0;
  for (std::size_t i = 0; i < hidden_units(); ++i) {
    g += w1_t_[i] * act::value_unchecked(base_.kind, w0_t_[i] * z + b0_t_[i]);
  }
  g += b1_t_[0];
  if (!std::isfinite(g)) throw NumericError("AFU output is not finite");
  return g;
}

std::vector<CurvePoint> Afu::sample(double z_min, double z_max, std::size_t count) const {
  std::vector<CurvePoint> curve;
  for (double z : linspace(z_min, z_max, count)) curve.push_back({z, (*this)(z)});
  return curve;
}

Afu::Handles Afu::bind(ad::Tape& tape) const {
  return {tape.param(w0_t_), tape.param(b0_t_), tape.param(w1_t_), tape.param(b1_t_)};
}

ad::TensorRef Afu::apply(const Handles& h, act::ActivationSpec base, const ad::TensorRef& z) {
  // Every element of z becomes one row; each row meets the same kappa.
  const ad::TensorRef column = ad::reshape(z, Shape{z.numel(), 1});
  const ad::TensorRef hidden = ad::add_row_bias(ad::matmul(column, h.w0), h.b0);
  const ad::TensorRef out = ad::add(ad::matmul(ad::activation(hidden, base), h.w1), h.b1);
  return ad::reshape(out, z.shape);
}

std::vector<double> Afu::flat() const {
  std::vector<double> v;
  for (const Tensor* t : parameters()) v.insert(v.end(), t->data.begin(), t->data.end());
  return v;
}

void save_afu(const Afu& afu, const std::filesystem::path& path) {
  ordered_json j;
  j["schema"] = kAfuSchema;
  j["hidden_units"] = afu.hidden_units();
  j["base"] = act::name(afu.base());
  j["w0"] = afu.w0();
  j["b0"] = afu.b0();
  j["w1"] = afu.w1();
  j["b1"] = afu.b1();
  std::ofstream out(path);
  if (!out) throw Error("cannot write AFU file " + path.string());
  out << j.dump(2) << "\n";
}

Afu load_afu(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open AFU file " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const ordered_json::parse_error& e) {
    throw FormatError("AFU file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.contains("schema") || j["schema"] != kAfuSchema) {
    throw FormatError("AFU file " + path.string() + ": expected schema '" + std::string(kAfuSchema) + "'");
  }
  try {
    const auto base = act::parse(j.at("base").get<std::string>());
    if (!base) throw FormatError("AFU file " + path.string() + ": unknown base activation");
    auto w0 = j.at("w0").get<std::vector<double>>();
    if (j.at("hidden_units").get<std::size_t>() != w0.size()) {
      throw FormatError("AFU file " + path.string() + ": hidden_units disagrees with w0 length");
    }
    return Afu::from_values(*base, std::move(w0), j.at("b0").get<std::vector<double>>(),
                            j.at("w1").get<std::vector<double>>(), j.at("b1").get<double>());
  } catch (const ordered_json::exception& e) {
    throw FormatError("AFU file " + path.string() + ": " + e.what());
  } catch (const ShapeError& e) {
    throw FormatError("AFU file " + path.string() + ": " + e.what());
  }
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "z,g\n";
  for (const auto& p : curve) out << p.z << ',' << p.g << '\n';
}

}  // namespace afu
