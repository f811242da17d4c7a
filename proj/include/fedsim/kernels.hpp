#pragma once

#include <cstddef>
#include <span>

// Hot loops of local training and aggregation.
//
// Every kernel exists twice: `serial` is the plain reference loop kept for
// testing and benchmarking, `parallel` is the OpenMP version the library
// calls. Parallel kernels split work over output elements only, so each output
// is accumulated in the same order as the reference and results are bitwise
// identical for any thread count. The one reduction (cdf_gap_sum) uses fixed
// blocks whose layout does not depend on the thread count either.
//
// Shapes are passed explicitly; all matrices are row-major.

namespace fedsim::kernels {

// Block length of the cdf_gap_sum reduction in both implementations.
inline constexpr std::size_t kReduceBlock = 4096;

namespace serial {

// out[n x m] = a[n x k] * b[k x m] + bias[m] (bias may be empty)
void gemm_bias(std::span<const double> a, std::span<const double> b, std::span<const double> bias,
               std::span<double> out, std::size_t n, std::size_t k, std::size_t m);

// out[k x m] = a[n x k]^T * g[n x m]
void gemm_at_b(std::span<const double> a, std::span<const double> g, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m);

// out[n x k] = g[n x m] * b[k x m]^T
void gemm_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m);

// sum_i |Phi((prior_i - mean)/sd) - Phi((client_i - mean)/sd)|
double cdf_gap_sum(std::span<const double> prior, std::span<const double> client, double mean,
                   double stddev);

// out_i = sum_n weights[n] * inputs[n][i], accumulated in n order.
void weighted_sum(std::span<const std::span<const double>> inputs, std::span<const double> weights,
                  std::span<double> out);

}  // namespace serial

namespace parallel {

void gemm_bias(std::span<const double> a, std::span<const double> b, std::span<const double> bias,
               std::span<double> out, std::size_t n, std::size_t k, std::size_t m);
void gemm_at_b(std::span<const double> a, std::span<const double> g, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m);
void gemm_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> out,
               std::size_t n, std::size_t k, std::size_t m);
double cdf_gap_sum(std::span<const double> prior, std::span<const double> client, double mean,
                   double stddev);
void weighted_sum(std::span<const std::span<const double>> inputs, std::span<const double> weights,
                  std::span<double> out);

}  // namespace parallel

/// Worker count the parallel kernels would use (1 without OpenMP).
int max_threads() noexcept;

}  // namespace fedsim::kernels
