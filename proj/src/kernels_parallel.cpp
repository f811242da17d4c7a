#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fedsim/kernels.hpp"
#include "fedsim/normal.hpp"

#ifdef FEDSIM_HAVE_OPENMP
#include <omp.h>
#endif

namespace fedsim::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kMinParallelWork = 1 << 15;

}  // namespace

int max_threads() noexcept {
#ifdef FEDSIM_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {

void gemm_bias(std::span<const double> a, std::span<const double> b, std::span<const double> bias,
               std::span<double> out, std::size_t n, std::size_t k, std::size_t m) {
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (n * k * m >= kMinParallelWork)
  for (std::int64_t si = 0; si < rows; ++si) {
    const auto i = static_cast<std::size_t>(si);
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
  const auto inner = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(static) if (n * k * m >= kMinParallelWork)
  for (std::int64_t sp = 0; sp < inner; ++sp) {
    const auto p = static_cast<std::size_t>(sp);
    double* o = out.data() + p * m;
    for (std::size_t j = 0; j < m; ++j) o[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* grow = g.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += aip * grow[j];
    }
  }
}

void gemm_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m) {
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (n * k * m >= kMinParallelWork)
  for (std::int64_t si = 0; si < rows; ++si) {
    const auto i = static_cast<std::size_t>(si);
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
  const std::size_t n = prior.size();
  const std::size_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(blocks, 0.0);
  const auto sblocks = static_cast<std::int64_t>(blocks);
#pragma omp parallel for schedule(static) if (blocks > 1)
  for (std::int64_t sb = 0; sb < sblocks; ++sb) {
    const auto begin = static_cast<std::size_t>(sb) * kReduceBlock;
    const auto end = std::min(n, begin + kReduceBlock);
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      s += std::abs(standard_normal_cdf((prior[i] - mean) * inv) -
                    standard_normal_cdf((client[i] - mean) * inv));
    }
    partial[static_cast<std::size_t>(sb)] = s;
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

void weighted_sum(std::span<const std::span<const double>> inputs, std::span<const double> weights,
                  std::span<double> out) {
  const auto len = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static) if (out.size() * inputs.size() >= kMinParallelWork)
  for (std::int64_t si = 0; si < len; ++si) {
    const auto i = static_cast<std::size_t>(si);
    double s = 0.0;
    for (std::size_t c = 0; c < inputs.size(); ++c) s += weights[c] * inputs[c][i];
    out[i] = s;
  }
}

}  // namespace parallel
}  // namespace fedsim::kernels
