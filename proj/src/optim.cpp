#include "afu/optim.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "afu/error.hpp"

namespace afu::optim {

namespace {

std::vector<Tensor> zeros_like(const std::vector<Tensor*>& params) {
  std::vector<Tensor> out;
  for (const Tensor* p : params) out.emplace_back(p->shape, 0.0);
  return out;
}

void check_grads(const std::vector<Tensor*>& params, std::span<const Tensor> grads) {
  if (grads.size() != params.size()) {
    throw ShapeError("optimizer: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape != params[i]->shape) {
      throw ShapeError("optimizer: gradient " + to_string(grads[i].shape) + " for parameter " +
                       std::to_string(i) + " of shape " + to_string(params[i]->shape));
    }
    if (!grads[i].all_finite()) {
      throw NumericError("optimizer: non-finite gradient for parameter " + std::to_string(i));
    }
  }
}

}  // namespace

Adam::Adam(AdamConfig cfg, std::vector<Tensor*> params)
    : cfg_(cfg), params_(std::move(params)), m_(zeros_like(params_)), v_(zeros_like(params_)) {
  if (!(cfg_.lr > 0 && cfg_.beta1 >= 0 && cfg_.beta1 < 1 && cfg_.beta2 >= 0 && cfg_.beta2 < 1 && cfg_.eps > 0)) {
    throw RangeError("Adam: hyperparameters out of range");
  }
}

void Adam::step(std::span<const Tensor> grads, double lr_multiplier) {
  if (!(lr_multiplier > 0)) throw RangeError("Adam: learning-rate multiplier must be positive");
  check_grads(params_, grads);
  const double lr = cfg_.lr * lr_multiplier;
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& x = *params_[p];
    Tensor& m = m_[p];
    Tensor& v = v_[p];
    const Tensor& g = grads[p];
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      x[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

AdaDelta::AdaDelta(AdaDeltaConfig cfg, std::vector<Tensor*> params)
    : cfg_(cfg), params_(std::move(params)), sq_grad_(zeros_like(params_)), sq_delta_(zeros_like(params_)) {
  if (!(cfg_.rho > 0 && cfg_.rho < 1 && cfg_.eps > 0)) throw RangeError("AdaDelta: hyperparameters out of range");
}

void AdaDelta::step(std::span<const Tensor> grads, double lr_multiplier) {
  if (!(lr_multiplier > 0)) throw RangeError("AdaDelta: learning-rate multiplier must be positive");
  check_grads(params_, grads);
  const double rho = cfg_.rho, eps = cfg_.eps;
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& x = *params_[p];
    Tensor& eg = sq_grad_[p];
    Tensor& ed = sq_delta_[p];
    const Tensor& g = grads[p];
    for (std::size_t i = 0; i < x.size(); ++i) {
      eg[i] = rho * eg[i] + (1.0 - rho) * g[i] * g[i];
      const double delta = -(std::sqrt(ed[i] + eps) / std::sqrt(eg[i] + eps)) * g[i] * lr_multiplier;
      ed[i] = rho * ed[i] + (1.0 - rho) * delta * delta;
      x[i] += delta;
    }
  }
}

void LrSchedule::validate() const {
  if (!(base_lr > 0)) throw RangeError("schedule: base_lr must be positive");
  if (!(gamma > 0 && gamma <= 1)) throw RangeError("schedule: gamma must lie in (0, 1]");
}

double LrSchedule::multiplier(long epoch) const {
  validate();
  if (epoch < 0) throw RangeError("schedule: epoch must be non-negative");
  if (epoch == 0) return base_lr;

  // gamma = n / 10^k with few digits: gamma^e = n^e / 10^(k e), one rounding.
  std::uint64_t scale = 1;
  for (int digits = 0; digits <= 6; ++digits, scale *= 10) {
    const double scaled = gamma * static_cast<double>(scale);
    const double n = std::round(scaled);
    if (std::abs(scaled - n) > 1e-9 * scaled) continue;
    double num = 1.0, den = 1.0;
    bool exact = true;
    for (long e = 0; e < epoch && exact; ++e) {
      num *= n;
      den *= static_cast<double>(scale);
      exact = num <= 9007199254740992.0 && den <= 9007199254740992.0;
    }
    if (exact) return base_lr * (num / den);
    break;
  }
  return base_lr * std::pow(gamma, static_cast<double>(epoch));
}

}  // namespace afu::optim
