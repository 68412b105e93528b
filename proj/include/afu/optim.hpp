#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "afu/tensor.hpp"

namespace afu::optim {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias-corrected moments. Parameters are updated in place; the
// pointers must outlive the optimizer.
class Adam {
 public:
  Adam(AdamConfig cfg, std::vector<Tensor*> params);

  // Throws ShapeError if grads do not match the parameters, NumericError
  // (naming the parameter index) if any gradient is non-finite; in both
  // cases no parameter is modified. The step size is lr * lr_multiplier.
  void step(std::span<const Tensor> grads, double lr_multiplier = 1.0);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor*> params_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

struct AdaDeltaConfig {
  double rho = 0.9;
  double eps = 1e-6;
};

// AdaDelta; the schedule enters as a multiplier on the unit update.
//   E[g2]  <- rho E[g2] + (1-rho) g^2
//   delta   = -lr * sqrt(E[dx2] + eps) / sqrt(E[g2] + eps) * g
//   E[dx2] <- rho E[dx2] + (1-rho) delta^2
class AdaDelta {
 public:
  AdaDelta(AdaDeltaConfig cfg, std::vector<Tensor*> params);

  // Same error contract as Adam::step; lr_multiplier must be positive.
  void step(std::span<const Tensor> grads, double lr_multiplier);

 private:
  AdaDeltaConfig cfg_;
  std::vector<Tensor*> params_;
  std::vector<Tensor> sq_grad_, sq_delta_;
};

// base_lr * gamma^epoch.
struct LrSchedule {
  double base_lr = 1.0;
  double gamma = 0.7;

  // Throws RangeError unless base_lr > 0 and 0 < gamma <= 1.
  void validate() const;
  // Throws RangeError for negative epochs.
  double multiplier(long epoch) const;
};

}  // namespace afu::optim
