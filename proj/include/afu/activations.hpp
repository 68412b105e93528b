#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace afu::act {

enum class ActivationKind { Linear, ReLU, LeakyReLU, Sigmoid, Tanh, Swish, Mish };

inline constexpr double kLeakySlope = 0.01;

struct ActivationSpec {
  ActivationKind kind = ActivationKind::ReLU;

  friend bool operator==(const ActivationSpec&, const ActivationSpec&) = default;
};

inline constexpr std::array<std::string_view, 7> kActivationNames = {
    "linear", "relu", "leaky_relu", "sigmoid", "tanh", "swish", "mish"};

std::string_view name(ActivationKind kind);
inline std::string_view name(ActivationSpec spec) { return name(spec.kind); }
std::optional<ActivationSpec> parse(std::string_view name);
// Throws ConfigError listing the valid names.
ActivationSpec parse_or_throw(std::string_view name);
std::string valid_names();

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ln(1 + e^z) without overflow for large |z|.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace detail

// Unchecked value/derivative used by the kernels; see value()/derivative()
// for the checked public entry points.
//
// Kink conventions at z == 0: ReLU uses derivative 0 and LeakyReLU uses the
// left-side slope 0.01. The forward value of LeakyReLU at 0 is 0 either way.
inline double value_unchecked(ActivationKind kind, double z) {
  switch (kind) {
    case ActivationKind::Linear:
      return z;
    case ActivationKind::ReLU:
      return z > 0 ? z : 0.0;
    case ActivationKind::LeakyReLU:
      return z >= 0 ? z : kLeakySlope * z;
    case ActivationKind::Sigmoid:
      return detail::sigmoid(z);
    case ActivationKind::Tanh:
      return std::tanh(z);
    case ActivationKind::Swish:
      return z * detail::sigmoid(z);
    case ActivationKind::Mish:
      return z * std::tanh(detail::softplus(z));
  }
  return 0.0;
}

inline double derivative_unchecked(ActivationKind kind, double z) {
  switch (kind) {
    case ActivationKind::Linear:
      return 1.0;
    case ActivationKind::ReLU:
      return z > 0 ? 1.0 : 0.0;
    case ActivationKind::LeakyReLU:
      return z > 0 ? 1.0 : kLeakySlope;
    case ActivationKind::Sigmoid: {
      const double s = detail::sigmoid(z);
      return s * (1.0 - s);
    }
    case ActivationKind::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case ActivationKind::Swish: {
      const double s = detail::sigmoid(z);
      return s + z * s * (1.0 - s);
    }
    case ActivationKind::Mish: {
      const double t = std::tanh(detail::softplus(z));
      return t + z * (1.0 - t * t) * detail::sigmoid(z);
    }
  }
  return 0.0;
}

// g(z). Throws NumericError on non-finite input.
double value(ActivationSpec spec, double z);
// g'(z). Throws NumericError on non-finite input.
double derivative(ActivationSpec spec, double z);

}  // namespace afu::act
