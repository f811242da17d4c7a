#include <benchmark/benchmark.h>

#include <vector>

#include "fedsim/kernels.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/rng.hpp"

namespace {

namespace ser = fedsim::kernels::serial;
namespace par = fedsim::kernels::parallel;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  fedsim::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Forward pass of one 64-example batch through the 784 -> 64 layer.
template <auto Kernel>
void BM_gemm_bias(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 784;
  const std::size_t m = 64;
  const auto a = random_vec(n * k, 1);
  const auto b = random_vec(k * m, 2);
  const auto bias = random_vec(m, 3);
  std::vector<double> out(n * m);
  for (auto _ : state) {
    Kernel(a, b, bias, out, n, k, m);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * k * m));
}

// Weight gradient of the same layer.
template <auto Kernel>
void BM_gemm_at_b(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 784;
  const std::size_t m = 64;
  const auto a = random_vec(n * k, 1);
  const auto g = random_vec(n * m, 2);
  std::vector<double> out(k * m);
  for (auto _ : state) {
    Kernel(a, g, out, n, k, m);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * k * m));
}

template <auto Kernel>
void BM_cdf_gap_sum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto prior = random_vec(n, 1);
  const auto client = random_vec(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(prior, client, 0.0, 0.5));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

template <auto Kernel>
void BM_weighted_sum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::vector<double>> inputs;
  std::vector<std::span<const double>> views;
  for (std::uint64_t c = 0; c < 8; ++c) inputs.push_back(random_vec(n, c));
  for (const auto& in : inputs) views.emplace_back(in);
  const std::vector<double> w(8, 0.125);
  std::vector<double> out(n);
  for (auto _ : state) {
    Kernel(views, w, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * 8));
}

void BM_train_local_epoch(benchmark::State& state) {
  fedsim::SynthSpec s;
  s.image_height = s.image_width = 28;
  s.per_class = 200;
  const auto data = fedsim::synth_generate(s);
  const auto params = fedsim::init_params({784, 64, 10}, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fedsim::train_local(params, data, {1, 64, 0.002, 3}));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * data.size()));
}

}  // namespace

BENCHMARK(BM_gemm_bias<ser::gemm_bias>)->Name("gemm_bias/serial")->Arg(64)->Arg(512);
BENCHMARK(BM_gemm_bias<par::gemm_bias>)->Name("gemm_bias/parallel")->Arg(64)->Arg(512);
BENCHMARK(BM_gemm_at_b<ser::gemm_at_b>)->Name("gemm_at_b/serial")->Arg(64)->Arg(512);
BENCHMARK(BM_gemm_at_b<par::gemm_at_b>)->Name("gemm_at_b/parallel")->Arg(64)->Arg(512);
BENCHMARK(BM_cdf_gap_sum<ser::cdf_gap_sum>)->Name("cdf_gap_sum/serial")->Arg(50176);
BENCHMARK(BM_cdf_gap_sum<par::cdf_gap_sum>)->Name("cdf_gap_sum/parallel")->Arg(50176);
BENCHMARK(BM_weighted_sum<ser::weighted_sum>)->Name("weighted_sum/serial")->Arg(50176);
BENCHMARK(BM_weighted_sum<par::weighted_sum>)->Name("weighted_sum/parallel")->Arg(50176);
BENCHMARK(BM_train_local_epoch)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
