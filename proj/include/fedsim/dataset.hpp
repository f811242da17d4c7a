#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

/// Flattened grayscale images with integer labels.
/// Invariants: labels.size() == features.rows(), every label < class_count,
/// features.cols() == image_height * image_width, all features in [0, 1].
struct Dataset {
  Tensor2D features;
  std::vector<int> labels;
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  std::size_t class_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
  bool empty() const noexcept { return labels.empty(); }

  /// Throws InvalidInput if any invariant is broken.
  void validate() const;

  /// Examples at the given indices, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---- IDX (MNIST) format --------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;  // 2051
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;  // 2049

/// Parses an IDX image file and its label file. Pixels are scaled by 1/255.
/// Throws FormatError (bad magic, names the file), ConsistencyError (count
/// mismatch or label >= class_count) or LengthError (truncated payload).
Dataset load_idx(std::span<const std::uint8_t> images_bytes, std::span<const std::uint8_t> labels_bytes,
                 std::size_t class_count = 10);

/// Reads both files from disk; IoError names the missing path.
Dataset load_idx_files(const std::filesystem::path& images, const std::filesystem::path& labels,
                       std::size_t class_count = 10);

/// Inverse of load_idx. Features are mapped back with round(v * 255).
std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> encode_idx(const Dataset& data);

// ---- synthetic data -------------------------------------------------------

/// Desk-scale stand-in for MNIST. Each class is a Gaussian blob around its own
/// mean image; the mean images share a common "ink" layout and differ by a
/// per-class perturbation of amplitude `contrast`. A border frame and the
/// upper-left corner stay dark in every mean image, as in MNIST.
struct SynthSpec {
  std::uint64_t seed = 1;
  std::size_t per_class = 100;
  std::size_t class_count = 10;
  std::size_t image_height = 14;
  std::size_t image_width = 14;
  double noise = 0.3;
  double contrast = 0.6;
};

/// Examples are emitted class by class (all of class 0, then class 1, ...).
Dataset synth_generate(const SynthSpec& spec);

/// Shorthand with square images of `dim` pixels (dim must be a perfect square)
/// and the default noise/contrast.
Dataset synth_generate(std::uint64_t seed, std::size_t per_class, std::size_t class_count, std::size_t dim);

/// The class mean images used by synth_generate for the same spec.
Tensor2D synth_class_means(const SynthSpec& spec);

// ---- partitioning ---------------------------------------------------------

struct PartitionPlan {
  std::size_t subset_count = 9;
  std::uint64_t seed = 0;
};

/// Class-balanced IID split: each class is shuffled (seeded) and dealt round
/// robin, with the dealer position carried across classes so subset totals
/// also differ by at most one. Subset 0 is the pretraining subset, subset
/// k >= 1 belongs to client k - 1. Examples keep their original relative order
/// inside each subset.
std::vector<Dataset> partition_iid(const Dataset& data, const PartitionPlan& plan);

/// Class-balanced random subsample of `count` examples (used to cut full MNIST
/// down to a desk-scale budget). Returns the input unchanged if count >= size.
Dataset subsample_balanced(const Dataset& data, std::size_t count, std::uint64_t seed);

}  // namespace fedsim
