#include "fedsim/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/normal.hpp"

namespace fedsim::kernels::serial {

void gemm_bias(std::span<const double> a, std::span<const double> b, std::span<const double> bias,
               std::span<double> out, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) o[j] = bias.empty() ? 0.0 : bias[j];
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += aip * brow[j];
    }
  }
}

void gemm_at_b(std::span<const double> a, std::span<const double> g, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t idx = 0; idx < k * m; ++idx) out[idx] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* grow = g.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      double* o = out.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += aip * grow[j];
    }
  }
}

void gemm_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* grow = g.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b.data() + p * m;
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
      out[i * k + p] = s;
    }
  }
}

double cdf_gap_sum(std::span<const double> prior, std::span<const double> client, double mean,
                   double stddev) {
  const double inv = 1.0 / stddev;
  double total = 0.0;
  for (std::size_t begin = 0; begin < prior.size(); begin += kReduceBlock) {
    const std::size_t end = std::min(prior.size(), begin + kReduceBlock);
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      s += std::abs(standard_normal_cdf((prior[i] - mean) * inv) - standard_normal_cdf((client[i] - mean) * inv));
    }
    total += s;
  }
  return total;
}

void weighted_sum(std::span<const std::span<const double>> inputs, std::span<const double> weights,
                  std::span<double> out) {
  for (double& v : out) v = 0.0;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    const double w = weights[n];
    const auto x = inputs[n];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * x[i];
  }
}

}  // namespace fedsim::kernels::serial
