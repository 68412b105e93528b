#include "afu/data.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <random>

#include "afu/error.hpp"
#include "afu/rng.hpp"

namespace afu::data {

Dataset::Dataset(Tensor features, std::vector<int> labels, LabelKind kind, std::size_t num_classes)
    : features_(std::move(features)), labels_(std::move(labels)), kind_(kind), num_classes_(num_classes) {
  if (features_.rank() != 2 || features_.rows() != labels_.size()) {
    throw ShapeError("dataset: " + std::to_string(labels_.size()) + " labels for features " +
                     to_string(features_.shape));
  }
  if (!features_.all_finite()) throw NumericError("dataset features must be finite");
  for (int y : labels_) {
    const bool ok = kind_ == LabelKind::Signed ? (y == -1 || y == 1)
                                               : (y >= 0 && static_cast<std::size_t>(y) < num_classes_);
    if (!ok) throw LabelError("dataset: label " + std::to_string(y) + " outside its domain");
  }
}

Tensor Dataset::gather_features(std::span<const std::size_t> indices) const {
  const std::size_t d = feature_dim();
  Tensor out(Shape{indices.size(), d}, 0.0);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = features_.row(indices[r]);
    std::copy(src.begin(), src.end(), out.data.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels_[i]);
  return out;
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  return Dataset(gather_features(indices), gather_labels(indices), kind_, num_classes_);
}

Dataset gen_xor_toy(const ToyConfig& cfg) {
  if (!(cfg.sigma > 0)) throw RangeError("toy data: sigma must be positive");
  struct Cluster {
    double cx, cy;
    int label;
  };
  constexpr std::array<Cluster, 4> clusters = {
      Cluster{-1, -1, +1}, Cluster{+1, +1, +1}, Cluster{-1, +1, -1}, Cluster{+1, -1, -1}};
  constexpr std::size_t n = ToyConfig::kPerCluster;

  Rng rng(cfg.seed);
  Tensor features(Shape{clusters.size() * n, 2}, 0.0);
  std::vector<int> labels;
  labels.reserve(clusters.size() * n);
  std::size_t row = 0;
  for (const auto& c : clusters) {
    for (std::size_t k = 0; k < n; ++k, ++row) {
      features.at(row, 0) = c.cx + rng.normal(0.0, cfg.sigma);
      features.at(row, 1) = c.cy + rng.normal(0.0, cfg.sigma);
      labels.push_back(c.label);
    }
  }
  return Dataset(std::move(features), std::move(labels), LabelKind::Signed, 2);
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    throw LengthError(path.string() + ": truncated header (" + std::to_string(bytes.size()) + " bytes)");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void check_magic(std::uint32_t actual, std::uint32_t expected, const std::filesystem::path& path) {
  if (actual != expected) {
    throw FormatError(path.string() + ": bad IDX magic, expected " + std::to_string(expected) + ", got " +
                      std::to_string(actual));
  }
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);

  check_magic(read_be32(img, 0, images), 2051, images);
  check_magic(read_be32(lab, 0, labels), 2049, labels);

  const std::size_t n = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t n_labels = read_be32(lab, 4, labels);
  if (n != n_labels) {
    throw ConsistencyError("IDX count mismatch: " + std::to_string(n) + " images vs " +
                           std::to_string(n_labels) + " labels");
  }
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + n * pixels) {
    throw LengthError(images.string() + ": expected " + std::to_string(16 + n * pixels) + " bytes, got " +
                      std::to_string(img.size()));
  }
  if (lab.size() < 8 + n) {
    throw LengthError(labels.string() + ": expected " + std::to_string(8 + n) + " bytes, got " +
                      std::to_string(lab.size()));
  }
  if (n == 0 || pixels == 0) throw FormatError(images.string() + ": empty image set");

  Tensor features(Shape{n, pixels}, 0.0);
  for (std::size_t i = 0; i < n * pixels; ++i) features.data[i] = img[16 + i] / 255.0;
  std::vector<int> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    ys[i] = lab[8 + i];
    if (ys[i] > 9) throw LabelError(labels.string() + ": label " + std::to_string(ys[i]) + " outside 0..9");
  }
  return Dataset(std::move(features), std::move(ys), LabelKind::Index, 10);
}

void write_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                     std::size_t rows, std::size_t cols, std::span<const std::uint8_t> pixels,
                     std::span<const std::uint8_t> label_bytes) {
  const std::size_t n = label_bytes.size();
  if (pixels.size() != n * rows * cols) throw ShapeError("IDX writer: pixel count does not match labels");
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw Error("cannot write IDX fixture");
  put_be32(img, 2051);
  put_be32(img, static_cast<std::uint32_t>(n));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  img.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  put_be32(lab, 2049);
  put_be32(lab, static_cast<std::uint32_t>(n));
  lab.write(reinterpret_cast<const char*>(label_bytes.data()), static_cast<std::streamsize>(n));
}

Dataset subset(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n > ds.size()) {
    throw RangeError("subset of " + std::to_string(n) + " from a dataset of " + std::to_string(ds.size()));
  }
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  order.resize(n);
  return ds.select(order);
}

std::vector<std::vector<std::size_t>> batches(std::size_t size, std::size_t batch_size,
                                              std::uint64_t shuffle_seed) {
  if (batch_size == 0) throw RangeError("batch size must be at least 1");
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t begin = 0; begin < size; begin += batch_size) {
    const std::size_t end = std::min(size, begin + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  for (std::size_t c = 0; c < ds.feature_dim(); ++c) out << 'x' << c << ',';
  out << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto s = ds.sample(i);
    for (double v : s.features) out << v << ',';
    out << s.label << '\n';
  }
}

}  // namespace afu::data
