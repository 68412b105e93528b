#pragma once

#include <span>
#include <string_view>

#include "afu/autograd.hpp"

namespace afu::loss {

enum class LossKind { Hinge, NegativeLogLikelihood };

std::string_view name(LossKind kind);
// "hinge" or "nll". Throws ConfigError.
LossKind parse(std::string_view name);

// max(0, 1 - y f). Throws LabelError unless y is -1 or +1.
double hinge(double f, int y);
// -log softmax(logits)[y] via log-sum-exp. Throws LabelError for y outside
// [0, C).
double nll(std::span<const double> logits, int y);

// Batch means on the tape. scores: [batch, 1]; logits: [batch, C].
ad::TensorRef hinge_mean(const ad::TensorRef& scores, std::span<const int> labels);
ad::TensorRef nll_mean(const ad::TensorRef& logits, std::span<const int> labels);

// Dispatches on kind.
ad::TensorRef batch_loss(LossKind kind, const ad::TensorRef& output, std::span<const int> labels);

}  // namespace afu::loss
