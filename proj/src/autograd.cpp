#include "afu/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "afu/error.hpp"
#include "afu/kernels.hpp"

namespace afu::ad {

using kernels::GemmArgs;
using kernels::Trans;

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::Max0Diff: return "max0diff";
    case OpKind::Activation: return "activation";
    case OpKind::AddRowBias: return "add_row_bias";
    case OpKind::Reshape: return "reshape";
    case OpKind::SliceCols: return "slice_cols";
    case OpKind::ConcatCols: return "concat_cols";
    case OpKind::NllMean: return "nll_mean";
  }
  return "?";
}

InitSpec InitSpec::glorot(std::size_t fan_in, std::size_t fan_out) {
  return uniform(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

Tensor InitSpec::draw(const Shape& shape, Rng& rng) const {
  Tensor t(shape, 0.0);
  if (kind == Kind::Constant) {
    t.fill(value);
  } else {
    for (auto& v : t.data) v = rng.uniform(-value, value);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Tape

TensorRef Tape::param(const Shape& shape, const InitSpec& init, Rng& rng) {
  if (shape.empty()) throw ShapeError("invalid parameter shape []: at least one dimension required");
  validate_shape(shape);
  return param(init.draw(shape, rng));
}

TensorRef Tape::param(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.is_param = true;
  auto ref = record(std::move(n));
  param_ids_.push_back(ref.id);
  return ref;
}

TensorRef Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return record(std::move(n));
}

const Tensor& Tape::value(const TensorRef& ref) const {
  check_owned(ref);
  return nodes_[ref.id].value;
}

void Tape::check_owned(const TensorRef& ref) const {
  if (ref.tape != this || ref.id >= nodes_.size()) {
    throw Error("tensor handle does not belong to this tape");
  }
}

TensorRef Tape::record(Node n) {
  for (auto in : n.inputs) {
    if (in >= nodes_.size()) throw Error("op input refers to a node not yet on the tape");
    if (nodes_[in].requires_grad) n.requires_grad = true;
  }
  if (!n.value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + std::string(op_name(n.op)));
  }
  TensorRef ref{nodes_.size(), n.value.shape, this};
  nodes_.push_back(std::move(n));
  return ref;
}

// ---------------------------------------------------------------------------
// Forward ops

namespace {

Tape& same_tape(const TensorRef& a, const TensorRef& b) {
  if (a.tape == nullptr || a.tape != b.tape) throw Error("operands live on different tapes");
  a.tape->check_owned(a);
  b.tape->check_owned(b);
  return *a.tape;
}

Tape& tape_of(const TensorRef& a) {
  if (a.tape == nullptr) throw Error("null tensor handle");
  a.tape->check_owned(a);
  return *a.tape;
}

[[noreturn]] void shape_mismatch(std::string_view op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

// Result shape of a broadcasting elementwise op.
Shape broadcast_shape(std::string_view op, const TensorRef& a, const TensorRef& b) {
  if (a.shape == b.shape) return a.shape;
  if (b.numel() == 1) return a.shape;
  if (a.numel() == 1) return b.shape;
  shape_mismatch(op, a.shape, b.shape);
}

template <typename F>
TensorRef elementwise(OpKind kind, const TensorRef& a, const TensorRef& b, F f) {
  Tape& tape = same_tape(a, b);
  const Shape out_shape = broadcast_shape(op_name(kind), a, b);
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  Node n;
  n.op = kind;
  n.inputs = {a.id, b.id};
  n.value = Tensor(out_shape, 0.0);
  const bool a_scalar = av.size() == 1, b_scalar = bv.size() == 1;
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    n.value[i] = f(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
  }
  return tape.record(std::move(n));
}

std::size_t rows_of(const Shape& s) { return s.size() == 2 ? s[0] : 1; }
std::size_t cols_of(const Shape& s) {
  if (s.size() == 2) return s[1];
  return s.empty() ? 1 : s[0];
}

}  // namespace

TensorRef matmul(const TensorRef& a, const TensorRef& b) {
  Tape& tape = same_tape(a, b);
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0]) {
    shape_mismatch("matmul", a.shape, b.shape);
  }
  const GemmArgs g{Trans::No, Trans::No, a.shape[0], b.shape[1], a.shape[1], false};
  Node n;
  n.op = OpKind::MatMul;
  n.inputs = {a.id, b.id};
  n.value = Tensor(Shape{g.m, g.n}, 0.0);
  kernels::gemm(g, tape.value(a).data, tape.value(b).data, n.value.data);
  return tape.record(std::move(n));
}

TensorRef matmul_transposed(const TensorRef& a, const TensorRef& b) {
  Tape& tape = same_tape(a, b);
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[1]) {
    shape_mismatch("matmul_transposed", a.shape, b.shape);
  }
  const GemmArgs g{Trans::No, Trans::Yes, a.shape[0], b.shape[0], a.shape[1], false};
  Node n;
  n.op = OpKind::MatMul;
  n.transpose_b = true;
  n.inputs = {a.id, b.id};
  n.value = Tensor(Shape{g.m, g.n}, 0.0);
  kernels::gemm(g, tape.value(a).data, tape.value(b).data, n.value.data);
  return tape.record(std::move(n));
}

TensorRef add(const TensorRef& a, const TensorRef& b) {
  return elementwise(OpKind::Add, a, b, [](double x, double y) { return x + y; });
}

TensorRef sub(const TensorRef& a, const TensorRef& b) {
  return elementwise(OpKind::Sub, a, b, [](double x, double y) { return x - y; });
}

TensorRef mul(const TensorRef& a, const TensorRef& b) {
  return elementwise(OpKind::Mul, a, b, [](double x, double y) { return x * y; });
}

TensorRef max0diff(const TensorRef& a, const TensorRef& b) {
  return elementwise(OpKind::Max0Diff, a, b, [](double x, double y) { return std::max(0.0, x - y); });
}

TensorRef scale(const TensorRef& a, double c) {
  Tape& tape = tape_of(a);
  Node n;
  n.op = OpKind::Scale;
  n.inputs = {a.id};
  n.scalar = c;
  n.value = tape.value(a);
  for (auto& v : n.value.data) v *= c;
  return tape.record(std::move(n));
}

TensorRef sum(const TensorRef& a) {
  Tape& tape = tape_of(a);
  double s = 0.0;
  for (double v : tape.value(a).data) s += v;
  Node n;
  n.op = OpKind::Sum;
  n.inputs = {a.id};
  n.value = Tensor::scalar(s);
  return tape.record(std::move(n));
}

TensorRef mean(const TensorRef& a) {
  Tape& tape = tape_of(a);
  double s = 0.0;
  for (double v : tape.value(a).data) s += v;
  Node n;
  n.op = OpKind::Mean;
  n.inputs = {a.id};
  n.value = Tensor::scalar(s / static_cast<double>(a.numel()));
  return tape.record(std::move(n));
}

TensorRef activation(const TensorRef& a, act::ActivationSpec spec) {
  Tape& tape = tape_of(a);
  const Tensor& in = tape.value(a);
  Node n;
  n.op = OpKind::Activation;
  n.activation = spec;
  n.inputs = {a.id};
  n.value = Tensor(in.shape, 0.0);
  kernels::activation_forward(spec.kind, in.data, n.value.data);
  return tape.record(std::move(n));
}

TensorRef add_row_bias(const TensorRef& x, const TensorRef& bias) {
  Tape& tape = same_tape(x, bias);
  const std::size_t rows = rows_of(x.shape), cols = cols_of(x.shape);
  if (x.shape.size() != 2 || bias.numel() != cols) shape_mismatch("add_row_bias", x.shape, bias.shape);
  const Tensor& b = tape.value(bias);
  Node n;
  n.op = OpKind::AddRowBias;
  n.inputs = {x.id, bias.id};
  n.value = tape.value(x);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) n.value.data[r * cols + c] += b[c];
  return tape.record(std::move(n));
}

TensorRef reshape(const TensorRef& a, Shape shape) {
  Tape& tape = tape_of(a);
  validate_shape(shape);
  if (numel(shape) != a.numel()) shape_mismatch("reshape", a.shape, shape);
  Node n;
  n.op = OpKind::Reshape;
  n.inputs = {a.id};
  n.value = Tensor(std::move(shape), tape.value(a).data);
  return tape.record(std::move(n));
}

TensorRef slice_cols(const TensorRef& a, std::size_t begin, std::size_t end) {
  Tape& tape = tape_of(a);
  if (a.shape.size() != 2 || begin >= end || end > a.shape[1]) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + to_string(a.shape));
  }
  const Tensor& in = tape.value(a);
  const std::size_t rows = a.shape[0], width = end - begin;
  Node n;
  n.op = OpKind::SliceCols;
  n.inputs = {a.id};
  n.col_begin = begin;
  n.value = Tensor(Shape{rows, width}, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c) n.value.at(r, c) = in.at(r, begin + c);
  return tape.record(std::move(n));
}

TensorRef concat_cols(std::span<const TensorRef> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& tape = tape_of(parts[0]);
  const std::size_t rows = rows_of(parts[0].shape);
  std::size_t total = 0;
  Node n;
  n.op = OpKind::ConcatCols;
  for (const auto& p : parts) {
    same_tape(parts[0], p);
    if (p.shape.size() != 2 || p.shape[0] != rows) shape_mismatch("concat_cols", parts[0].shape, p.shape);
    total += p.shape[1];
    n.inputs.push_back(p.id);
  }
  n.value = Tensor(Shape{rows, total}, 0.0);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Tensor& in = tape.value(p);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.shape[1]; ++c) n.value.at(r, offset + c) = in.at(r, c);
    offset += p.shape[1];
  }
  return tape.record(std::move(n));
}

TensorRef nll_mean(const TensorRef& logits, std::span<const int> labels) {
  Tape& tape = tape_of(logits);
  const std::size_t rows = rows_of(logits.shape), cols = cols_of(logits.shape);
  if (labels.size() != rows) {
    throw ShapeError("nll_mean: " + std::to_string(labels.size()) + " labels for logits " +
                     to_string(logits.shape));
  }
  const Tensor& z = tape.value(logits);
  Node n;
  n.op = OpKind::NllMean;
  n.inputs = {logits.id};
  n.labels.assign(labels.begin(), labels.end());
  n.saved = Tensor(Shape{rows, cols}, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= cols) {
      throw LabelError("nll_mean: label " + std::to_string(y) + " outside [0, " + std::to_string(cols) + ")");
    }
    const double* row = z.data.data() + r * cols;
    const double top = *std::max_element(row, row + cols);
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) denom += std::exp(row[c] - top);
    const double log_denom = std::log(denom);
    for (std::size_t c = 0; c < cols; ++c) n.saved.at(r, c) = std::exp(row[c] - top - log_denom);
    total += -(row[y] - top - log_denom);
  }
  n.value = Tensor::scalar(total / static_cast<double>(rows));
  return tape.record(std::move(n));
}

// ---------------------------------------------------------------------------
// Reverse pass

namespace {

// Adds `upstream` into `grad`; when the input was broadcast (one element)
// the contributions of every output position are summed into it.
void accumulate_broadcast(Tensor& grad, const Tensor& upstream, const std::vector<double>& factor) {
  if (grad.size() == upstream.size()) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += upstream[i] * factor[i];
  } else {
    double s = 0.0;
    for (std::size_t i = 0; i < upstream.size(); ++i) s += upstream[i] * factor[i];
    grad[0] += s;
  }
}

}  // namespace

GradientMap backward(Tape& tape, const TensorRef& loss) {
  tape.check_owned(loss);
  if (loss.numel() != 1 || loss.shape.size() > 1) {
    throw RankError("backward: loss must be scalar-shaped, got " + to_string(loss.shape));
  }

  const std::size_t count = loss.id + 1;
  std::vector<Tensor> grads(count);
  std::vector<bool> has_grad(count, false);
  auto grad_of = [&](std::size_t id) -> Tensor* {
    const Node& n = tape.node(id);
    if (!n.requires_grad) return nullptr;
    if (!has_grad[id]) {
      grads[id] = Tensor(n.value.shape, 0.0);
      has_grad[id] = true;
    }
    return &grads[id];
  };

  if (tape.node(loss.id).requires_grad) {
    grads[loss.id] = Tensor(loss.shape, 1.0);
    has_grad[loss.id] = true;
  }

  for (std::size_t id = count; id-- > 0;) {
    if (!has_grad[id]) continue;
    const Node& n = tape.node(id);
    const Tensor& up = grads[id];

    switch (n.op) {
      case OpKind::Leaf:
        break;

      case OpKind::MatMul: {
        const Tensor& av = tape.node(n.inputs[0]).value;
        const Tensor& bv = tape.node(n.inputs[1]).value;
        const std::size_t m = av.shape[0], k = av.shape[1];
        const std::size_t cols = n.value.shape[1];
        if (Tensor* ga = grad_of(n.inputs[0])) {
          // A * B:   dA = dC * B^T.   A * B^T: dA = dC * B.
          const GemmArgs g{Trans::No, n.transpose_b ? Trans::No : Trans::Yes, m, k, cols, true};
          kernels::gemm(g, up.data, bv.data, ga->data);
        }
        if (Tensor* gb = grad_of(n.inputs[1])) {
          if (n.transpose_b) {
            // B is cols x k: dB = dC^T * A.
            kernels::gemm(GemmArgs{Trans::Yes, Trans::No, cols, k, m, true}, up.data, av.data, gb->data);
          } else {
            // B is k x cols: dB = A^T * dC.
            kernels::gemm(GemmArgs{Trans::Yes, Trans::No, k, cols, m, true}, av.data, up.data, gb->data);
          }
        }
        break;
      }

      case OpKind::Add:
      case OpKind::Sub:
      case OpKind::Mul:
      case OpKind::Max0Diff: {
        const Tensor& av = tape.node(n.inputs[0]).value;
        const Tensor& bv = tape.node(n.inputs[1]).value;
        const std::size_t size = up.size();
        const bool a_s = av.size() == 1 && size > 1, b_s = bv.size() == 1 && size > 1;
        std::vector<double> da(size), db(size);
        for (std::size_t i = 0; i < size; ++i) {
          const double x = av[a_s ? 0 : i], y = bv[b_s ? 0 : i];
          switch (n.op) {
            case OpKind::Add: da[i] = 1.0; db[i] = 1.0; break;
            case OpKind::Sub: da[i] = 1.0; db[i] = -1.0; break;
            case OpKind::Mul: da[i] = y; db[i] = x; break;
            default: {
              const double active = (x - y) > 0 ? 1.0 : 0.0;
              da[i] = active;
              db[i] = -active;
            }
          }
        }
        // Inputs may alias (x * x); both contributions must land.
        if (Tensor* ga = grad_of(n.inputs[0])) accumulate_broadcast(*ga, up, da);
        if (Tensor* gb = grad_of(n.inputs[1])) accumulate_broadcast(*gb, up, db);
        break;
      }

      case OpKind::Scale:
        if (Tensor* g = grad_of(n.inputs[0])) {
          for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.scalar * up[i];
        }
        break;

      case OpKind::Sum:
      case OpKind::Mean:
        if (Tensor* g = grad_of(n.inputs[0])) {
          const double f = n.op == OpKind::Sum ? up[0] : up[0] / static_cast<double>(g->size());
          for (auto& v : g->data) v += f;
        }
        break;

      case OpKind::Activation:
        if (Tensor* g = grad_of(n.inputs[0])) {
          kernels::activation_backward(n.activation.kind, tape.node(n.inputs[0]).value.data, up.data,
                                       g->data);
        }
        break;

      case OpKind::AddRowBias: {
        if (Tensor* gx = grad_of(n.inputs[0])) {
          for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += up[i];
        }
        if (Tensor* gb = grad_of(n.inputs[1])) {
          const std::size_t cols = gb->size(), rows = up.size() / cols;
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) (*gb)[c] += up[r * cols + c];
        }
        break;
      }

      case OpKind::Reshape:
        if (Tensor* g = grad_of(n.inputs[0])) {
          for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += up[i];
        }
        break;

      case OpKind::SliceCols:
        if (Tensor* g = grad_of(n.inputs[0])) {
          const std::size_t rows = up.shape[0], width = up.shape[1];
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < width; ++c) g->at(r, n.col_begin + c) += up.at(r, c);
        }
        break;

      case OpKind::ConcatCols: {
        std::size_t offset = 0;
        for (auto in : n.inputs) {
          const std::size_t width = tape.node(in).value.shape[1];
          if (Tensor* g = grad_of(in)) {
            for (std::size_t r = 0; r < up.shape[0]; ++r)
              for (std::size_t c = 0; c < width; ++c) g->at(r, c) += up.at(r, offset + c);
          }
          offset += width;
        }
        break;
      }

      case OpKind::NllMean:
        if (Tensor* g = grad_of(n.inputs[0])) {
          const std::size_t rows = n.saved.shape[0], cols = n.saved.shape[1];
          const double f = up[0] / static_cast<double>(rows);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              const double onehot = static_cast<int>(c) == n.labels[r] ? 1.0 : 0.0;
              g->at(r, c) += f * (n.saved.at(r, c) - onehot);
            }
          }
        }
        break;
    }
  }

  GradientMap out;
  for (auto pid : tape.param_ids()) {
    if (pid < count && has_grad[pid]) {
      out.entries_.emplace(pid, std::move(grads[pid]));
    } else {
      out.entries_.emplace(pid, Tensor(tape.node(pid).value.shape, 0.0));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

double grad_check(const LossBuilder& build, std::vector<Tensor> params, double h) {
  if (!(h > 0)) throw RangeError("grad_check: step must be positive");

  auto evaluate = [&](const std::vector<Tensor>& values) {
    Tape tape;
    std::vector<TensorRef> refs;
    for (const auto& v : values) refs.push_back(tape.param(v));
    const TensorRef loss = build(tape, refs);
    return tape.value(loss)[0];
  };

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<TensorRef> refs;
    for (const auto& v : params) refs.push_back(tape.param(v));
    const TensorRef loss = build(tape, refs);
    const GradientMap grads = backward(tape, loss);
    for (const auto& r : refs) analytic.push_back(grads[r]);
  }

  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double original = params[p][i];
      params[p][i] = original + h;
      const double plus = evaluate(params);
      params[p][i] = original - h;
      const double minus = evaluate(params);
      params[p][i] = original;
      const double fd = (plus - minus) / (2.0 * h);
      if (!std::isfinite(fd)) throw NumericError("grad_check: non-finite finite difference");
      const double a = analytic[p][i];
      worst = std::max(worst, std::abs(a - fd) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace afu::ad
