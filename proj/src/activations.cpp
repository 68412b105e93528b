#include "afu/activations.hpp"

#include "afu/error.hpp"

namespace afu::act {

std::string_view name(ActivationKind kind) {
  return kActivationNames[static_cast<std::size_t>(kind)];
}

std::optional<ActivationSpec> parse(std::string_view n) {
  for (std::size_t i = 0; i < kActivationNames.size(); ++i) {
    if (kActivationNames[i] == n) return ActivationSpec{static_cast<ActivationKind>(i)};
  }
  return std::nullopt;
}

std::string valid_names() {
  std::string s;
  for (auto n : kActivationNames) {
    if (!s.empty()) s += ", ";
    s += n;
  }
  return s;
}

ActivationSpec parse_or_throw(std::string_view n) {
  if (auto spec = parse(n)) return *spec;
  throw ConfigError("unknown activation '" + std::string(n) + "'; valid names: " + valid_names());
}

static void require_finite(double z, ActivationSpec spec) {
  if (!std::isfinite(z)) {
    throw NumericError("non-finite input to activation " + std::string(name(spec)));
  }
}

double value(ActivationSpec spec, double z) {
  require_finite(z, spec);
  return value_unchecked(spec.kind, z);
}

double derivative(ActivationSpec spec, double z) {
  require_finite(z, spec);
  return derivative_unchecked(spec.kind, z);
}

}  // namespace afu::act
