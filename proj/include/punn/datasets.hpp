#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "punn/numeric.hpp"

namespace punn {

struct Dataset {
  DenseMatrix features;              // n x d
  std::vector<std::size_t> labels;   // n entries in [0, num_classes)
  std::size_t num_classes = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  Dataset subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_counts() const;
};

enum class SyntheticKind { Moons, Circles, Xor, Helix, Rings };

SyntheticKind parse_synthetic_kind(std::string_view name);
std::string_view to_string(SyntheticKind kind) noexcept;

/// Noise-free helix arm point: (t cos(t + c pi), t sin(t + c pi)).
std::array<double, 2> helix_point(std::size_t cls, double t) noexcept;

/// Inner and outer radius of ring class c in the concentric-rings set.
std::array<double, 2> ring_band(std::size_t cls) noexcept;

/// 2-D benchmark sets with additive N(0, noise^2) noise per coordinate.
/// Moons and circles follow the usual generator geometry (unit half
/// circles offset by 0.5; circles with inner factor 0.5, outer class 0).
Dataset make_synthetic(SyntheticKind kind, std::size_t n, double noise, std::uint64_t seed);

/// Reads a comma-separated numeric table. `label_column` is a header name
/// or an integer index (negative counts from the end). Labels are encoded
/// in order of first appearance.
Dataset load_csv(const std::filesystem::path& path, std::string_view label_column, bool header);

struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population std, 1 for constant features

  void apply(DenseMatrix& x) const;
  std::vector<double> apply(std::span<const double> x) const;
  bool empty() const noexcept { return mean.empty(); }
};

StandardizationStats fit_standardization(const DenseMatrix& x);

/// Fits statistics on `train` and applies them to `train` and every entry
/// of `others`.
StandardizationStats standardize(Dataset& train, std::span<Dataset* const> others = {});

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

/// Per-class test counts round(fraction * class size), nudged so the total
/// is within one of round(fraction * n).
Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed);

/// Reorders class ids: new class i is old class order[i].
Dataset reorder_classes(const Dataset& ds, std::span<const std::size_t> order);

DenseMatrix read_idx_images(const std::filesystem::path& path);
std::vector<std::size_t> read_idx_labels(const std::filesystem::path& path);

struct MnistData {
  Dataset train;
  Dataset test;
};

/// Loads train-images-idx3-ubyte / train-labels-idx1-ubyte and the t10k
/// pair from `dir`. Pixels are returned as 0..255 reals.
MnistData load_mnist(const std::filesystem::path& dir);

}  // namespace punn
