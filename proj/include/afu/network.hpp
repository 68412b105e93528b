#pragma once

// Host predictor F(x; theta): dense layers whose activation is either a fixed
// canonical function or a reference into the network's AFU list.

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "afu/activations.hpp"
#include "afu/afu.hpp"
#include "afu/autograd.hpp"
#include "afu/data.hpp"
#include "afu/grid.hpp"
#include "afu/rng.hpp"

namespace afu {

enum class Mode { Train, Eval };

// Indices into Network::afus(). One index binds a single AFU to the whole
// layer; `units` indices bind one AFU per neuron.
struct AfuBinding {
  std::vector<std::size_t> indices;
};

using LayerActivation = std::variant<act::ActivationSpec, AfuBinding>;

struct DenseLayer {
  Tensor weights;  // out x in, one row per neuron
  Tensor bias;     // out
  LayerActivation activation = act::ActivationSpec{act::ActivationKind::Linear};
  double dropout_rate = 0.0;  // applied to this layer's output in Train mode

  std::size_t in() const { return weights.cols(); }
  std::size_t out() const { return weights.rows(); }
  bool uses_afu() const { return std::holds_alternative<AfuBinding>(activation); }
};

struct LayerSpec {
  std::size_t units = 1;
  std::string activation = "linear";  // a canonical name or "afu"
  double dropout = 0.0;
};

struct AfuSettings {
  std::size_t hidden_units = 8;
  act::ActivationSpec base{act::ActivationKind::ReLU};
  SharingScope scope = SharingScope::Network;
};

struct NetworkSpec {
  std::size_t input_dim = 2;
  std::vector<LayerSpec> layers;
  AfuSettings afu;
};

class Network {
 public:
  struct Binding {
    std::vector<ad::TensorRef> weights, biases;
    std::vector<Afu::Handles> afus;

    // Same order as Network::parameters().
    std::vector<ad::TensorRef> all() const;
  };

  struct Trace {
    ad::TensorRef output;
    std::vector<ad::TensorRef> pre;   // z = W x + b per layer
    std::vector<ad::TensorRef> post;  // activation output, before dropout
  };

  // Layer weights ~ Glorot uniform, biases 0, drawn in layer order; AFUs are
  // created afterwards, so theta depends only on the seed and layer sizes.
  static Network build(const NetworkSpec& spec, Rng& rng);

  // Validates layer chaining, dropout rates, AFU indices and scope
  // cardinality. Throws ShapeError / ConfigError.
  Network(std::vector<DenseLayer> layers, std::vector<Afu> afus, SharingScope scope);

  std::size_t input_dim() const { return layers_.front().in(); }
  std::size_t output_dim() const { return layers_.back().out(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<Afu>& afus() const { return afus_; }
  std::vector<Afu>& afus() { return afus_; }
  SharingScope scope() const { return scope_; }

  Binding bind(ad::Tape& tape) const;
  // x: [batch, input_dim]. rng is only consulted for dropout in Train mode.
  // Throws ShapeError on an input width mismatch.
  Trace forward(const Binding& binding, const ad::TensorRef& x, Mode mode, Rng* rng) const;

  // Eval-mode outputs for a [batch, input_dim] block.
  Tensor predict(const Tensor& x) const;
  // Eval-mode post-activations of every layer.
  std::vector<Tensor> layer_outputs(const Tensor& x) const;

  std::vector<Tensor*> parameters();
  std::size_t parameter_count() const;

 private:
  ad::TensorRef activate(const Binding& binding, const DenseLayer& layer, const ad::TensorRef& z) const;

  std::vector<DenseLayer> layers_;
  std::vector<Afu> afus_;
  SharingScope scope_;
};

// Binary (one output): sign with 0 -> +1. Multiclass: argmax, lowest index
// wins ties.
int predict_class(std::span<const double> output);

// Fraction of accuracy over a dataset in Eval mode.
double accuracy(const Network& net, const data::Dataset& ds);

// Per hidden layer, per neuron: fraction of samples whose post-activation
// magnitude is below 1e-6.
std::vector<std::vector<double>> activation_stats(const Network& net, const data::Dataset& ds);

// Post-activation of one neuron over a 2-D input grid. Throws
// UnsupportedError unless the network takes 2 inputs, RangeError for a bad
// layer/neuron index.
GridField neuron_activation_map(const Network& net, std::size_t layer, std::size_t neuron,
                                const GridSpec& grid);

// Network output 0 over a 2-D input grid.
GridField score_field(const Network& net, const GridSpec& grid);

}  // namespace afu
