#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/model.hpp"

namespace fedsim {

// Dense feed-forward classifier: ReLU on hidden layers, linear output layer,
// softmax cross-entropy loss, plain mini-batch SGD. Stands in for the small
// CNN of the original MNIST experiments; aggregation only ever sees flat
// per-layer tensors, so the architecture does not change the defense.

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Glorot-uniform weights (s = sqrt(6 / (fan_in + fan_out))), zero biases.
ModelParams init_params(const std::vector<std::size_t>& architecture, std::uint64_t seed);

/// Logits for every row of `batch`. Throws InvalidInput on a width mismatch.
Tensor2D forward(const ModelParams& params, const Tensor2D& batch);

struct LossAndGradient {
  double loss = 0.0;
  ModelParams gradient;
};

/// Mean cross-entropy over `data` and its exact gradient by backpropagation.
LossAndGradient loss_and_gradient(const ModelParams& params, const Dataset& data);

/// `cfg.epochs` passes of mini-batch SGD. Each epoch shuffles with a seed of
/// cfg.seed + epoch; the last batch may be short. Pure: `params` is copied.
ModelParams train_local(const ModelParams& params, const Dataset& data, const TrainConfig& cfg);

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

/// Accuracy uses argmax with ties going to the lowest class index.
Evaluation evaluate(const ModelParams& params, const Dataset& data);

/// Predicted class per example (same tie rule as evaluate).
std::vector<int> predict(const ModelParams& params, const Tensor2D& features);

/// Largest relative difference between the backprop gradient and central
/// finite differences over every parameter. Entries where both gradients are
/// below 1e-9 in magnitude count as zero error.
double gradient_check(const ModelParams& params, const Dataset& data, double epsilon);

}  // namespace fedsim
