#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "afu/tensor.hpp"

namespace afu::data {

// Binary problems label with {-1, +1}; multiclass problems with {0..C-1}.
enum class LabelKind { Signed, Index };

struct SampleView {
  std::span<const double> features;
  int label;
};

// Immutable labelled design matrix (one row per sample).
class Dataset {
 public:
  // Throws LabelError for labels outside the declared domain and
  // ShapeError when the row count and label count differ.
  Dataset(Tensor features, std::vector<int> labels, LabelKind kind, std::size_t num_classes);

  std::size_t size() const { return labels_.size(); }
  std::size_t feature_dim() const { return features_.cols(); }
  std::size_t num_classes() const { return num_classes_; }
  LabelKind label_kind() const { return kind_; }

  SampleView sample(std::size_t i) const { return {features_.row(i), labels_[i]}; }
  const Tensor& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }

  // Rows `indices` as a [n, d] batch and their labels.
  Tensor gather_features(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
  Dataset select(std::span<const std::size_t> indices) const;

 private:
  Tensor features_;
  std::vector<int> labels_;
  LabelKind kind_;
  std::size_t num_classes_;
};

// Four isotropic Gaussian clusters, 500 points each: (-1,-1) and (+1,+1)
// labelled +1, (-1,+1) and (+1,-1) labelled -1.
struct ToyConfig {
  static constexpr std::size_t kPerCluster = 500;
  double sigma = 0.5;
  std::uint64_t seed = 0;
};

// Throws RangeError unless sigma > 0.
Dataset gen_xor_toy(const ToyConfig& cfg);

// Big-endian IDX pair: images magic 2051 with dims (n, rows, cols) of unsigned
// bytes, labels magic 2049 with n bytes. Pixels are scaled by 1/255.
// Throws FormatError (magic), LengthError (truncation), ConsistencyError
// (image/label count mismatch), LabelError (label > 9).
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// Writes an IDX image/label pair (used for fixtures and round trips).
void write_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                     std::size_t rows, std::size_t cols, std::span<const std::uint8_t> pixels,
                     std::span<const std::uint8_t> label_bytes);

// Uniform draw of n samples without replacement. Throws RangeError for
// n > |ds|.
Dataset subset(const Dataset& ds, std::size_t n, std::uint64_t seed);

// Partition of [0, size) into consecutive batches of a seeded permutation;
// the last batch may be short. Throws RangeError for batch_size == 0.
std::vector<std::vector<std::size_t>> batches(std::size_t size, std::size_t batch_size,
                                              std::uint64_t shuffle_seed);

// CSV with header x0,x1,...,label.
void write_csv(const Dataset& ds, const std::filesystem::path& path);

}  // namespace afu::data
