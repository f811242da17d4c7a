#include "fedsim/model.hpp"

#include <cmath>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidInput("tensor data length " + std::to_string(data_.size()) + " does not match " +
                       std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

bool Tensor2D::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ModelParams::ModelParams(std::vector<std::size_t> architecture, std::vector<NamedTensor> layers)
    : architecture_(std::move(architecture)), layers_(std::move(layers)) {
  if (architecture_.size() < 2) throw InvalidInput("architecture needs at least input and output sizes");
  if (layers_.size() != 2 * dense_count()) {
    throw InvalidInput("expected " + std::to_string(2 * dense_count()) + " layers, got " +
                       std::to_string(layers_.size()));
  }
  for (std::size_t k = 0; k < dense_count(); ++k) {
    const auto in = architecture_[k];
    const auto out = architecture_[k + 1];
    if (weight(k).rows() != in || weight(k).cols() != out) {
      throw InvalidInput("layer " + layers_[2 * k].name + " is not " + std::to_string(in) + "x" +
                         std::to_string(out));
    }
    if (bias(k).rows() != 1 || bias(k).cols() != out) {
      throw InvalidInput("layer " + layers_[2 * k + 1].name + " is not 1x" + std::to_string(out));
    }
  }
}

ModelParams ModelParams::zeros(std::vector<std::size_t> architecture) {
  std::vector<NamedTensor> layers;
  for (std::size_t k = 0; k + 1 < architecture.size(); ++k) {
    const std::string prefix = "dense_" + std::to_string(k);
    layers.push_back({prefix + ".weight", Tensor2D(architecture[k], architecture[k + 1])});
    layers.push_back({prefix + ".bias", Tensor2D(1, architecture[k + 1])});
  }
  return ModelParams(std::move(architecture), std::move(layers));
}

std::size_t ModelParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.tensor.size();
  return n;
}

bool ModelParams::compatible_with(const ModelParams& other) const noexcept {
  if (architecture_ != other.architecture_ || layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].name != other.layers_[i].name) return false;
    if (!layers_[i].tensor.same_shape(other.layers_[i].tensor)) return false;
  }
  return true;
}

}  // namespace fedsim
