#pragma once

// Activation Function Unit: a one-hidden-layer scalar network
//
//   G(z) = sum_i w1[i] * base(w0[i] * z + b0[i]) + b1
//
// applied elementwise wherever a layer binds it. One Afu may be bound at any
// number of sites; the tape sums the per-site gradients into its 3N+1
// parameters.

#include <array>
#include <cstddef>
#include <filesystem>
#include <string_view>
#include <vector>

#include "afu/activations.hpp"
#include "afu/autograd.hpp"
#include "afu/rng.hpp"
#include "afu/tensor.hpp"

namespace afu {

enum class SharingScope { Network, PerLayer, PerNeuron };

std::string_view scope_name(SharingScope scope);
// Accepts "network", "per_layer", "per_neuron". Throws ConfigError.
SharingScope parse_scope(std::string_view name);

struct CurvePoint {
  double z = 0.0;
  double g = 0.0;
};

class Afu {
 public:
  // Tape handles for one forward pass.
  struct Handles {
    ad::TensorRef w0, b0, w1, b1;
  };

  // w0, w1 ~ Uniform(-a, a) with a = sqrt(6 / (N + 1)); b0 = b1 = 0.
  // Throws RangeError when hidden_units == 0.
  static Afu create(std::size_t hidden_units, act::ActivationSpec base, Rng& rng);
  // Explicit parameters; w0, b0, w1 must share one non-zero length.
  static Afu from_values(act::ActivationSpec base, std::vector<double> w0, std::vector<double> b0,
                         std::vector<double> w1, double b1);

  std::size_t hidden_units() const { return w1_t_.size(); }
  act::ActivationSpec base() const { return base_; }
  std::size_t parameter_count() const { return 3 * hidden_units() + 1; }

  // G(z). Throws NumericError when z or the result is not finite.
  double operator()(double z) const;

  // `count` evenly spaced points over [z_min, z_max], endpoints included.
  // Throws RangeError unless z_min < z_max and count >= 2.
  std::vector<CurvePoint> sample(double z_min, double z_max, std::size_t count) const;

  // Registers the four parameter tensors on `tape` as trainable leaves.
  Handles bind(ad::Tape& tape) const;
  // Applies G elementwise to a tensor of any shape.
  static ad::TensorRef apply(const Handles& h, act::ActivationSpec base, const ad::TensorRef& z);
  ad::TensorRef apply(const Handles& h, const ad::TensorRef& z) const { return apply(h, base_, z); }

  // Parameter tensors in bind() order: w0 [1,N], b0 [N], w1 [N,1], b1 [1].
  std::array<Tensor*, 4> parameters() { return {&w0_t_, &b0_t_, &w1_t_, &b1_t_}; }
  std::array<const Tensor*, 4> parameters() const { return {&w0_t_, &b0_t_, &w1_t_, &b1_t_}; }

  // Flattened kappa = (w0, b0, w1, b1), length 3N+1.
  std::vector<double> flat() const;

  std::vector<double> w0() const { return w0_t_.data; }
  std::vector<double> b0() const { return b0_t_.data; }
  std::vector<double> w1() const { return w1_t_.data; }
  double b1() const { return b1_t_[0]; }

 private:
  Afu(act::ActivationSpec base, std::vector<double> w0, std::vector<double> b0, std::vector<double> w1,
      double b1);

  act::ActivationSpec base_;
  Tensor w0_t_, b0_t_, w1_t_, b1_t_;
};

// Versioned text file: {"schema": "afu-params/1", "hidden_units", "base",
// "w0", "b0", "w1", "b1"}.
inline constexpr std::string_view kAfuSchema = "afu-params/1";
void save_afu(const Afu& afu, const std::filesystem::path& path);
// Throws FormatError on a missing/unknown schema tag or malformed arrays.
Afu load_afu(const std::filesystem::path& path);

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path);

}  // namespace afu
