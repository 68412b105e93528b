#pragma once

// Reverse-mode automatic differentiation over dense double tensors.
//
// A Tape records every operation of one forward pass in topological order.
// backward() walks the record in reverse and accumulates adjoints, so a
// parameter that is read at several sites (a shared AFU, a broadcast bias)
// receives the sum of the per-site contributions. Tapes are cheap and are
// rebuilt for every forward pass; parameter values live outside the tape and
// are copied in with Tape::param().

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "afu/activations.hpp"
#include "afu/rng.hpp"
#include "afu/tensor.hpp"

namespace afu::ad {

struct InitSpec {
  enum class Kind { Constant, Uniform };
  Kind kind = Kind::Constant;
  double value = 0.0;  // constant value, or half-width of the uniform range

  static InitSpec constant(double c) { return {Kind::Constant, c}; }
  static InitSpec uniform(double half_width) { return {Kind::Uniform, half_width}; }
  // Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
  static InitSpec glorot(std::size_t fan_in, std::size_t fan_out);

  Tensor draw(const Shape& shape, Rng& rng) const;
};

class Tape;

// Handle to one node of a tape.
struct TensorRef {
  std::size_t id = 0;
  Shape shape;
  Tape* tape = nullptr;

  std::size_t numel() const { return afu::numel(shape); }
};

enum class OpKind {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  Sum,
  Mean,
  Max0Diff,
  Activation,
  AddRowBias,
  Reshape,
  SliceCols,
  ConcatCols,
  NllMean,
};

std::string_view op_name(OpKind kind);

struct Node {
  OpKind op = OpKind::Leaf;
  std::vector<std::size_t> inputs;
  Tensor value;
  bool requires_grad = false;
  bool is_param = false;

  // Op-specific data saved for the backward pass.
  double scalar = 0.0;                      // Scale factor
  act::ActivationSpec activation;           // Activation
  bool transpose_b = false;                 // MatMul: value = A * B^T
  std::size_t col_begin = 0;                // SliceCols
  std::vector<int> labels;                  // NllMean
  Tensor saved;                             // NllMean: softmax probabilities
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Trainable leaf initialised from `init`. Throws ShapeError on empty shape
  // or zero dimension.
  TensorRef param(const Shape& shape, const InitSpec& init, Rng& rng);
  // Trainable leaf holding a copy of `value`.
  TensorRef param(Tensor value);
  // Non-trainable leaf (inputs, labels, dropout masks).
  TensorRef constant(Tensor value);

  const Tensor& value(const TensorRef& ref) const;
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::size_t>& param_ids() const { return param_ids_; }

  // Appends an op node. Inputs must already be on this tape. Throws
  // NumericError if the forward value is not finite.
  TensorRef record(Node node);

  void check_owned(const TensorRef& ref) const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::size_t> param_ids_;
};

// Gradients of a scalar loss with respect to every registered parameter.
class GradientMap {
 public:
  // Throws std::out_of_range when `param` is not a registered parameter.
  const Tensor& operator[](const TensorRef& param) const { return entries_.at(param.id); }
  const Tensor& at(std::size_t param_id) const { return entries_.at(param_id); }
  std::size_t size() const { return entries_.size(); }

 private:
  friend GradientMap backward(Tape& tape, const TensorRef& loss);
  std::unordered_map<std::size_t, Tensor> entries_;
};

// Elementwise ops accept equal shapes or a one-element operand broadcast
// against the other. Shape violations throw ShapeError naming both shapes.
TensorRef matmul(const TensorRef& a, const TensorRef& b);
// a * b^T, used by dense layers whose weights are stored out x in.
TensorRef matmul_transposed(const TensorRef& a, const TensorRef& b);
TensorRef add(const TensorRef& a, const TensorRef& b);
TensorRef sub(const TensorRef& a, const TensorRef& b);
TensorRef mul(const TensorRef& a, const TensorRef& b);
TensorRef scale(const TensorRef& a, double c);
TensorRef sum(const TensorRef& a);
TensorRef mean(const TensorRef& a);
// max(0, a - b) elementwise; subgradient 0 where a == b.
TensorRef max0diff(const TensorRef& a, const TensorRef& b);
TensorRef activation(const TensorRef& a, act::ActivationSpec spec);
// x: [rows, cols], bias: cols elements, added to every row.
TensorRef add_row_bias(const TensorRef& x, const TensorRef& bias);
TensorRef reshape(const TensorRef& a, Shape shape);
// Columns [begin, end) of a rank-2 tensor.
TensorRef slice_cols(const TensorRef& a, std::size_t begin, std::size_t end);
TensorRef concat_cols(std::span<const TensorRef> parts);
// Mean over rows of -log softmax(logits[r])[labels[r]], via log-sum-exp.
// Throws LabelError for labels outside [0, cols).
TensorRef nll_mean(const TensorRef& logits, std::span<const int> labels);

// Reverse pass from a scalar-shaped loss ([1] or []). Throws RankError
// otherwise. Parameters not on a path to the loss map to zeros.
GradientMap backward(Tape& tape, const TensorRef& loss);

// Builds the loss for the given parameter handles on a fresh tape.
using LossBuilder = std::function<TensorRef(Tape&, std::span<const TensorRef>)>;

// Max over all coordinates of |analytic - fd| / max(1, |analytic|) where fd
// is the central difference (f(p+h) - f(p-h)) / 2h. Throws NumericError if
// any forward value is non-finite.
double grad_check(const LossBuilder& build, std::vector<Tensor> params, double h = 1e-5);

}  // namespace afu::ad
