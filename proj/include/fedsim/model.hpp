#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedsim {

/// Dense row-major matrix of doubles.
class Tensor2D {
 public:
  Tensor2D() = default;
  Tensor2D(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Tensor2D& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor2D&, const Tensor2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct NamedTensor {
  std::string name;
  Tensor2D tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Parameters of a dense network, one entry per weight matrix and per bias row,
/// in forward order: dense_0.weight, dense_0.bias, dense_1.weight, ...
/// Weight k has shape (architecture[k] x architecture[k+1]); bias k is 1 x architecture[k+1].
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(std::vector<std::size_t> architecture, std::vector<NamedTensor> layers);

  /// All-zero parameters for the given layer sizes.
  static ModelParams zeros(std::vector<std::size_t> architecture);

  const std::vector<std::size_t>& architecture() const noexcept { return architecture_; }
  const std::vector<NamedTensor>& layers() const noexcept { return layers_; }
  std::vector<NamedTensor>& layers() noexcept { return layers_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  const Tensor2D& tensor(std::size_t i) const { return layers_[i].tensor; }
  Tensor2D& tensor(std::size_t i) { return layers_[i].tensor; }

  std::size_t dense_count() const noexcept { return architecture_.empty() ? 0 : architecture_.size() - 1; }
  const Tensor2D& weight(std::size_t k) const { return layers_[2 * k].tensor; }
  const Tensor2D& bias(std::size_t k) const { return layers_[2 * k + 1].tensor; }
  Tensor2D& weight(std::size_t k) { return layers_[2 * k].tensor; }
  Tensor2D& bias(std::size_t k) { return layers_[2 * k + 1].tensor; }

  std::size_t input_dim() const { return architecture_.front(); }
  std::size_t output_dim() const { return architecture_.back(); }
  std::size_t parameter_count() const noexcept;

  /// Same layer names, order and shapes.
  bool compatible_with(const ModelParams& other) const noexcept;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::vector<std::size_t> architecture_;
  std::vector<NamedTensor> layers_;
};

/// What a client sends back after local training. reported_examples is
/// self-declared and unverifiable by the server.
struct ClientUpdate {
  int client_id = 0;
  ModelParams params;
  std::uint64_t reported_examples = 1;
};

}  // namespace fedsim
