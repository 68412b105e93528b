#include "afu/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "afu/error.hpp"

namespace afu::loss {

std::string_view name(LossKind kind) {
  return kind == LossKind::Hinge ? "hinge" : "nll";
}

LossKind parse(std::string_view n) {
  if (n == "hinge") return LossKind::Hinge;
  if (n == "nll") return LossKind::NegativeLogLikelihood;
  throw ConfigError("unknown loss '" + std::string(n) + "'; valid: hinge, nll");
}

static void check_signed(int y) {
  if (y != -1 && y != 1) throw LabelError("hinge loss needs labels in {-1, +1}, got " + std::to_string(y));
}

double hinge(double f, int y) {
  check_signed(y);
  return std::max(0.0, 1.0 - y * f);
}

double nll(std::span<const double> logits, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= logits.size()) {
    throw LabelError("nll: label " + std::to_string(y) + " outside [0, " + std::to_string(logits.size()) + ")");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double z : logits) denom += std::exp(z - top);
  return -(logits[y] - top - std::log(denom));
}

ad::TensorRef hinge_mean(const ad::TensorRef& scores, std::span<const int> labels) {
  if (scores.numel() != labels.size()) {
    throw ShapeError("hinge: " + std::to_string(labels.size()) + " labels for scores " + to_string(scores.shape));
  }
  Tensor y(scores.shape, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_signed(labels[i]);
    y[i] = labels[i];
  }
  ad::Tape& tape = *scores.tape;
  const ad::TensorRef margin = ad::mul(tape.constant(std::move(y)), scores);
  return ad::mean(ad::max0diff(tape.constant(Tensor::scalar(1.0)), margin));
}

ad::TensorRef nll_mean(const ad::TensorRef& logits, std::span<const int> labels) {
  return ad::nll_mean(logits, labels);
}

ad::TensorRef batch_loss(LossKind kind, const ad::TensorRef& output, std::span<const int> labels) {
  return kind == LossKind::Hinge ? hinge_mean(output, labels) : loss::nll_mean(output, labels);
}

}  // namespace afu::loss
