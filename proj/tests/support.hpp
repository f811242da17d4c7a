#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

namespace fedsim::test {

// Phi(z) by the composite trapezoid rule on the density over [-12, z].
inline double trapezoid_cdf(double z, std::size_t steps = 200000) {
  const double lo = -12.0;
  if (z <= lo) return 0.0;
  const double h = (z - lo) / static_cast<double>(steps);
  const auto pdf = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
  double s = 0.5 * (pdf(lo) + pdf(z));
  for (std::size_t i = 1; i < steps; ++i) s += pdf(lo + h * static_cast<double>(i));
  return s * h;
}

inline ModelParams random_params(const std::vector<std::size_t>& arch, Rng& rng, double scale = 1.0) {
  ModelParams p = ModelParams::zeros(arch);
  for (auto& layer : p.layers()) {
    for (double& v : layer.tensor.values()) v = rng.uniform(-scale, scale);
  }
  return p;
}

// A client that moved from `prior` by at most `step` per element.
inline ModelParams perturbed(const ModelParams& prior, Rng& rng, double step) {
  ModelParams p = prior;
  for (auto& layer : p.layers()) {
    for (double& v : layer.tensor.values()) v += rng.uniform(-step, step);
  }
  return p;
}

inline Dataset tiny_dataset(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.features = Tensor2D(n, dim);
  for (double& v : d.features.values()) v = rng.uniform();
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.labels[i] = static_cast<int>(i % classes);
  d.image_height = 1;
  d.image_width = dim;
  d.class_count = classes;
  return d;
}

}  // namespace fedsim::test
