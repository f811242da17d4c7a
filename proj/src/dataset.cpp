#include "fedsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

void Dataset::validate() const {
  if (labels.size() != features.rows()) {
    throw InvalidInput("dataset has " + std::to_string(features.rows()) + " feature rows but " +
                       std::to_string(labels.size()) + " labels");
  }
  if (features.cols() != image_height * image_width) {
    throw InvalidInput("feature width " + std::to_string(features.cols()) + " is not " +
                       std::to_string(image_height) + "x" + std::to_string(image_width));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
      throw InvalidInput("label " + std::to_string(y) + " outside [0, " + std::to_string(class_count) + ")");
    }
  }
  for (double v : features.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("feature value outside [0, 1]");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.image_height = image_height;
  out.image_width = image_width;
  out.class_count = class_count;
  out.features = Tensor2D(indices.size(), dim());
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = features.row(indices[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.labels.push_back(labels[indices[r]]);
  }
  return out;
}

// ---- IDX ------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Dataset load_idx(std::span<const std::uint8_t> images_bytes, std::span<const std::uint8_t> labels_bytes,
                 std::size_t class_count) {
  if (images_bytes.size() < 4) throw LengthError("images file: shorter than its magic number");
  if (labels_bytes.size() < 4) throw LengthError("labels file: shorter than its magic number");
  if (const auto magic = read_be32(images_bytes, 0); magic != kIdxImagesMagic) {
    throw FormatError("images file: magic " + std::to_string(magic) + ", expected " +
                      std::to_string(kIdxImagesMagic));
  }
  if (const auto magic = read_be32(labels_bytes, 0); magic != kIdxLabelsMagic) {
    throw FormatError("labels file: magic " + std::to_string(magic) + ", expected " +
                      std::to_string(kIdxLabelsMagic));
  }
  if (images_bytes.size() < 16) throw LengthError("images file: header truncated");
  if (labels_bytes.size() < 8) throw LengthError("labels file: header truncated");

  const std::size_t count = read_be32(images_bytes, 4);
  const std::size_t rows = read_be32(images_bytes, 8);
  const std::size_t cols = read_be32(images_bytes, 12);
  const std::size_t label_count = read_be32(labels_bytes, 4);
  if (count != label_count) {
    throw ConsistencyError("images file holds " + std::to_string(count) + " images but labels file holds " +
                           std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = rows * cols;
  if (images_bytes.size() - 16 < count * pixels) {
    throw LengthError("images file: expected " + std::to_string(count * pixels) + " pixel bytes, found " +
                      std::to_string(images_bytes.size() - 16));
  }
  if (labels_bytes.size() - 8 < count) {
    throw LengthError("labels file: expected " + std::to_string(count) + " label bytes, found " +
                      std::to_string(labels_bytes.size() - 8));
  }

  Dataset data;
  data.image_height = rows;
  data.image_width = cols;
  data.class_count = class_count;
  data.features = Tensor2D(count, pixels);
  auto values = data.features.values();
  for (std::size_t i = 0; i < count * pixels; ++i) values[i] = images_bytes[16 + i] / 255.0;
  data.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int y = labels_bytes[8 + i];
    if (static_cast<std::size_t>(y) >= class_count) {
      throw ConsistencyError("labels file: label " + std::to_string(y) + " at index " + std::to_string(i) +
                             " is not below class count " + std::to_string(class_count));
    }
    data.labels[i] = y;
  }
  return data;
}

Dataset load_idx_files(const std::filesystem::path& images, const std::filesystem::path& labels,
                       std::size_t class_count) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  return load_idx(img, lab, class_count);
}

std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> encode_idx(const Dataset& data) {
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;
  images.reserve(16 + data.features.size());
  write_be32(images, kIdxImagesMagic);
  write_be32(images, static_cast<std::uint32_t>(data.size()));
  write_be32(images, static_cast<std::uint32_t>(data.image_height));
  write_be32(images, static_cast<std::uint32_t>(data.image_width));
  for (double v : data.features.values()) {
    images.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  write_be32(labels, kIdxLabelsMagic);
  write_be32(labels, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels) labels.push_back(static_cast<std::uint8_t>(y));
  return {std::move(images), std::move(labels)};
}

// ---- synthetic ---------------------------------------------------------------

namespace {

std::size_t scaled(std::size_t reference, std::size_t side) {
  return static_cast<std::size_t>(std::lround(static_cast<double>(reference) * static_cast<double>(side) / 28.0));
}

bool is_dark_pixel(std::size_t r, std::size_t c, std::size_t h, std::size_t w) {
  const std::size_t mr = std::max<std::size_t>(1, scaled(4, h));
  const std::size_t mc = std::max<std::size_t>(1, scaled(4, w));
  if (r < mr || c < mc || r + mr >= h || c + mc >= w) return true;
  // The corner where backdoor triggers live never carries class signal.
  return r < scaled(7, h) && c < scaled(7, w);
}

}  // namespace

Tensor2D synth_class_means(const SynthSpec& spec) {
  const std::size_t h = spec.image_height;
  const std::size_t w = spec.image_width;
  Tensor2D means(spec.class_count, h * w);
  // Means depend only on the geometry and class count, so train and test sets
  // drawn with different seeds share them.
  Rng rng(derive_seed(0x6d65616e73ULL, h, w, spec.class_count));
  std::vector<double> base(h * w, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      base[r * w + c] = is_dark_pixel(r, c, h, w) ? 0.0 : rng.uniform(0.2, 0.8);
    }
  }
  for (std::size_t k = 0; k < spec.class_count; ++k) {
    for (std::size_t p = 0; p < h * w; ++p) {
      const double delta = rng.uniform(-1.0, 1.0);
      means(k, p) = base[p] == 0.0 ? 0.0 : std::clamp(base[p] + spec.contrast * delta, 0.0, 1.0);
    }
  }
  return means;
}

Dataset synth_generate(const SynthSpec& spec) {
  if (spec.per_class < 1) throw InvalidInput("synth_generate: per_class must be >= 1");
  if (spec.class_count < 2) throw InvalidInput("synth_generate: class_count must be >= 2");
  if (spec.image_height == 0 || spec.image_width == 0) throw InvalidInput("synth_generate: empty image");
  if (spec.noise < 0.0) throw InvalidInput("synth_generate: noise must be >= 0");

  const Tensor2D means = synth_class_means(spec);
  const std::size_t d = spec.image_height * spec.image_width;
  Dataset data;
  data.image_height = spec.image_height;
  data.image_width = spec.image_width;
  data.class_count = spec.class_count;
  data.features = Tensor2D(spec.per_class * spec.class_count, d);
  data.labels.reserve(spec.per_class * spec.class_count);
  for (std::size_t k = 0; k < spec.class_count; ++k) {
    Rng rng(derive_seed(spec.seed, k));
    const auto mean = means.row(k);
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      auto row = data.features.row(data.labels.size());
      for (std::size_t p = 0; p < d; ++p) {
        const double noise = spec.noise == 0.0 ? 0.0 : spec.noise * rng.normal();
        row[p] = std::clamp(mean[p] + noise, 0.0, 1.0);
      }
      data.labels.push_back(static_cast<int>(k));
    }
  }
  return data;
}

Dataset synth_generate(std::uint64_t seed, std::size_t per_class, std::size_t class_count, std::size_t dim) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dim))));
  if (side * side != dim) throw InvalidInput("synth_generate: dim must be a perfect square");
  SynthSpec spec;
  spec.seed = seed;
  spec.per_class = per_class;
  spec.class_count = class_count;
  spec.image_height = side;
  spec.image_width = side;
  return synth_generate(spec);
}

// ---- partitioning -----------------------------------------------------------

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& data) {
  std::vector<std::vector<std::size_t>> by_class(data.class_count);
  for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  return by_class;
}

}  // namespace

std::vector<Dataset> partition_iid(const Dataset& data, const PartitionPlan& plan) {
  if (plan.subset_count < 2) throw InvalidInput("partition_iid: subset_count must be >= 2");
  if (data.size() < plan.subset_count * data.class_count) {
    throw InvalidInput("partition_iid: " + std::to_string(data.size()) + " examples cannot fill " +
                       std::to_string(plan.subset_count) + " subsets x " + std::to_string(data.class_count) +
                       " classes");
  }
  auto by_class = indices_by_class(data);
  std::vector<std::vector<std::size_t>> assigned(plan.subset_count);
  std::size_t dealer = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    Rng rng(derive_seed(plan.seed, c));
    rng.shuffle(std::span<std::size_t>(by_class[c]));
    for (std::size_t idx : by_class[c]) {
      assigned[dealer % plan.subset_count].push_back(idx);
      ++dealer;
    }
  }
  std::vector<Dataset> out;
  out.reserve(plan.subset_count);
  for (auto& idx : assigned) {
    std::sort(idx.begin(), idx.end());
    out.push_back(data.subset(idx));
  }
  return out;
}

Dataset subsample_balanced(const Dataset& data, std::size_t count, std::uint64_t seed) {
  if (count >= data.size()) return data;
  auto by_class = indices_by_class(data);
  const std::size_t classes = by_class.size();
  std::vector<std::size_t> chosen;
  chosen.reserve(count);
  for (std::size_t c = 0; c < classes; ++c) {
    Rng rng(derive_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(by_class[c]));
    const std::size_t quota = count / classes + (c < count % classes ? 1 : 0);
    const std::size_t take = std::min(quota, by_class[c].size());
    chosen.insert(chosen.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(chosen.begin(), chosen.end());
  return data.subset(chosen);
}

}  // namespace fedsim
