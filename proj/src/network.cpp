#include "afu/network.hpp"

#include <algorithm>
#include <cmath>

#include "afu/error.hpp"

namespace afu {

namespace {

constexpr std::size_t kEvalChunk = 512;

}  // namespace

std::vector<ad::TensorRef> Network::Binding::all() const {
  std::vector<ad::TensorRef> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l]);
    out.push_back(biases[l]);
  }
  for (const auto& h : afus) {
    out.push_back(h.w0);
    out.push_back(h.b0);
    out.push_back(h.w1);
    out.push_back(h.b1);
  }
  return out;
}

Network Network::build(const NetworkSpec& spec, Rng& rng) {
  if (spec.layers.empty()) throw ConfigError("network needs at least one layer");
  std::vector<DenseLayer> layers;
  std::size_t in = spec.input_dim;
  for (const auto& ls : spec.layers) {
    if (ls.units == 0) throw ConfigError("layer units must be at least 1");
    DenseLayer layer;
    layer.weights = ad::InitSpec::glorot(in, ls.units).draw(Shape{ls.units, in}, rng);
    layer.bias = Tensor(Shape{ls.units}, 0.0);
    layer.dropout_rate = ls.dropout;
    if (ls.activation != "afu") layer.activation = act::parse_or_throw(ls.activation);
    layers.push_back(std::move(layer));
    in = ls.units;
  }

  std::vector<Afu> afus;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (spec.layers[l].activation != "afu") continue;
    AfuBinding binding;
    switch (spec.afu.scope) {
      case SharingScope::Network:
        if (afus.empty()) afus.push_back(Afu::create(spec.afu.hidden_units, spec.afu.base, rng));
        binding.indices = {0};
        break;
      case SharingScope::PerLayer:
        binding.indices = {afus.size()};
        afus.push_back(Afu::create(spec.afu.hidden_units, spec.afu.base, rng));
        break;
      case SharingScope::PerNeuron:
        for (std::size_t u = 0; u < layers[l].out(); ++u) {
          binding.indices.push_back(afus.size());
          afus.push_back(Afu::create(spec.afu.hidden_units, spec.afu.base, rng));
        }
        break;
    }
    layers[l].activation = std::move(binding);
  }
  return Network(std::move(layers), std::move(afus), spec.afu.scope);
}

Network::Network(std::vector<DenseLayer> layers, std::vector<Afu> afus, SharingScope scope)
    : layers_(std::move(layers)), afus_(std::move(afus)), scope_(scope) {
  if (layers_.empty()) throw ConfigError("network needs at least one layer");
  std::size_t afu_layers = 0, afu_neurons = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.rank() != 2 || layer.bias.size() != layer.out()) {
      throw ShapeError("layer " + std::to_string(l) + ": weights " + to_string(layer.weights.shape) +
                       " vs bias " + to_string(layer.bias.shape));
    }
    if (l > 0 && layers_[l - 1].out() != layer.in()) {
      throw ShapeError("layer " + std::to_string(l) + " expects " + std::to_string(layer.in()) +
                       " inputs but the previous layer produces " + std::to_string(layers_[l - 1].out()));
    }
    if (!(layer.dropout_rate >= 0.0 && layer.dropout_rate < 1.0)) {
      throw ConfigError("layer " + std::to_string(l) + ": dropout rate must lie in [0, 1)");
    }
    if (const auto* b = std::get_if<AfuBinding>(&layer.activation)) {
      if (b->indices.size() != 1 && b->indices.size() != layer.out()) {
        throw ConfigError("layer " + std::to_string(l) + ": AFU binding must name 1 or one-per-neuron AFUs");
      }
      for (auto idx : b->indices) {
        if (idx >= afus_.size()) throw ConfigError("layer " + std::to_string(l) + ": AFU index out of range");
      }
      ++afu_layers;
      afu_neurons += layer.out();
    }
  }
  std::size_t expected = 0;
  switch (scope_) {
    case SharingScope::Network: expected = afu_layers > 0 ? 1 : 0; break;
    case SharingScope::PerLayer: expected = afu_layers; break;
    case SharingScope::PerNeuron: expected = afu_neurons; break;
  }
  if (afus_.size() != expected) {
    throw ConfigError("scope " + std::string(scope_name(scope_)) + " expects " + std::to_string(expected) +
                      " AFUs, network holds " + std::to_string(afus_.size()));
  }
}

Network::Binding Network::bind(ad::Tape& tape) const {
  Binding b;
  for (const auto& layer : layers_) {
    b.weights.push_back(tape.param(layer.weights));
    b.biases.push_back(tape.param(layer.bias));
  }
  for (const auto& a : afus_) b.afus.push_back(a.bind(tape));
  return b;
}

ad::TensorRef Network::activate(const Binding& binding, const DenseLayer& layer,
                                const ad::TensorRef& z) const {
  if (const auto* spec = std::get_if<act::ActivationSpec>(&layer.activation)) {
    if (spec->kind == act::ActivationKind::Linear) return z;
    return ad::activation(z, *spec);
  }
  const auto& idx = std::get<AfuBinding>(layer.activation).indices;
  if (idx.size() == 1) return afus_[idx[0]].apply(binding.afus[idx[0]], z);
  std::vector<ad::TensorRef> columns;
  for (std::size_t u = 0; u < idx.size(); ++u) {
    columns.push_back(afus_[idx[u]].apply(binding.afus[idx[u]], ad::slice_cols(z, u, u + 1)));
  }
  return ad::concat_cols(columns);
}

Network::Trace Network::forward(const Binding& binding, const ad::TensorRef& x, Mode mode, Rng* rng) const {
  if (x.shape.size() != 2 || x.shape[1] != input_dim()) {
    throw ShapeError("network input " + to_string(x.shape) + " does not match input dimension " +
                     std::to_string(input_dim()));
  }
  Trace trace;
  ad::TensorRef h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const ad::TensorRef z = ad::add_row_bias(ad::matmul_transposed(h, binding.weights[l]), binding.biases[l]);
    h = activate(binding, layer, z);
    trace.pre.push_back(z);
    trace.post.push_back(h);
    if (mode == Mode::Train && layer.dropout_rate > 0.0) {
      if (rng == nullptr) throw ConfigError("dropout in Train mode needs an rng");
      const double keep = 1.0 - layer.dropout_rate;
      Tensor mask(h.shape, 0.0);
      for (auto& m : mask.data) m = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      h = ad::mul(h, x.tape->constant(std::move(mask)));
    }
  }
  trace.output = h;
  return trace;
}

Tensor Network::predict(const Tensor& x) const {
  auto outs = layer_outputs(x);
  return std::move(outs.back());
}

std::vector<Tensor> Network::layer_outputs(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != input_dim()) {
    throw ShapeError("network input " + to_string(x.shape) + " does not match input dimension " +
                     std::to_string(input_dim()));
  }
  const std::size_t rows = x.rows();
  std::vector<Tensor> outs;
  for (const auto& layer : layers_) outs.emplace_back(Shape{rows, layer.out()}, 0.0);

  for (std::size_t begin = 0; begin < rows; begin += kEvalChunk) {
    const std::size_t end = std::min(rows, begin + kEvalChunk);
    Tensor chunk(Shape{end - begin, x.cols()},
                 std::vector<double>(x.data.begin() + static_cast<std::ptrdiff_t>(begin * x.cols()),
                                     x.data.begin() + static_cast<std::ptrdiff_t>(end * x.cols())));
    ad::Tape tape;
    const Binding b = bind(tape);
    const Trace t = forward(b, tape.constant(std::move(chunk)), Mode::Eval, nullptr);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Tensor& v = tape.value(t.post[l]);
      std::copy(v.data.begin(), v.data.end(),
                outs[l].data.begin() + static_cast<std::ptrdiff_t>(begin * layers_[l].out()));
    }
  }
  return outs;
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_) {
    out.push_back(&layer.weights);
    out.push_back(&layer.bias);
  }
  for (auto& a : afus_) {
    for (Tensor* t : a.parameters()) out.push_back(t);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
  for (const auto& a : afus_) n += a.parameter_count();
  return n;
}

int predict_class(std::span<const double> output) {
  if (output.size() == 1) return output[0] >= 0.0 ? 1 : -1;
  return static_cast<int>(std::max_element(output.begin(), output.end()) - output.begin());
}

double accuracy(const Network& net, const data::Dataset& ds) {
  const Tensor out = net.predict(ds.features());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (predict_class(out.row(i)) == ds.labels()[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

std::vector<std::vector<double>> activation_stats(const Network& net, const data::Dataset& ds) {
  if (ds.size() == 0) throw RangeError("activation_stats needs a non-empty dataset");
  const auto outs = net.layer_outputs(ds.features());
  std::vector<std::vector<double>> stats;
  for (std::size_t l = 0; l + 1 < outs.size(); ++l) {
    const Tensor& h = outs[l];
    std::vector<double> fractions(h.cols(), 0.0);
    for (std::size_t r = 0; r < h.rows(); ++r)
      for (std::size_t c = 0; c < h.cols(); ++c)
        if (std::abs(h.at(r, c)) < 1e-6) fractions[c] += 1.0;
    for (auto& f : fractions) f /= static_cast<double>(h.rows());
    stats.push_back(std::move(fractions));
  }
  return stats;
}

GridField neuron_activation_map(const Network& net, std::size_t layer, std::size_t neuron,
                                const GridSpec& grid) {
  if (net.input_dim() != 2) throw UnsupportedError("activation maps need a 2-input network");
  if (layer >= net.layers().size() || neuron >= net.layers()[layer].out()) {
    throw RangeError("no neuron " + std::to_string(neuron) + " in layer " + std::to_string(layer));
  }
  return evaluate_grid(grid, [&](const Tensor& points, std::span<double> scores) {
    const auto outs = net.layer_outputs(points);
    for (std::size_t r = 0; r < scores.size(); ++r) scores[r] = outs[layer].at(r, neuron);
  });
}

GridField score_field(const Network& net, const GridSpec& grid) {
  if (net.input_dim() != 2) throw UnsupportedError("score fields need a 2-input network");
  return evaluate_grid(grid, [&](const Tensor& points, std::span<double> scores) {
    const Tensor out = net.predict(points);
    for (std::size_t r = 0; r < scores.size(); ++r) scores[r] = out.at(r, 0);
  });
}

}  // namespace afu
