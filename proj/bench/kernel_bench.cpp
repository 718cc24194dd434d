#include <benchmark/benchmark.h>

#include <vector>

#include "classic/autodiff/rng.hpp"
#include "classic/kernels/kernels.hpp"

namespace {

using namespace classic;

std::vector<double> random_values(std::size_t n) {
  Rng rng(n);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1, 1);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const kernels::GemmShape s{n, n, n, false, true};
  const auto a = random_values(n * n), b = random_values(n * n);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::gemm(s, 1, a.data(), b.data(), c.data(), false);
    } else {
      kernels::serial::gemm(s, 1, a.data(), b.data(), c.data(), false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <bool Parallel>
void BM_Softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 64;
  const auto x = random_values(rows * cols);
  std::vector<double> y(rows * cols);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::softmax_rows(rows, cols, x.data(), nullptr, y.data(), true);
    } else {
      kernels::serial::softmax_rows(rows, cols, x.data(), nullptr, y.data(), true);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_LayerNorm(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 128;
  const auto x = random_values(rows * cols), g = random_values(cols), b = random_values(cols);
  std::vector<double> y(rows * cols), mean(rows), rstd(rows);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::layer_norm_rows(rows, cols, x.data(), g.data(), b.data(), 1e-12, y.data(), {mean.data(), rstd.data()});
    } else {
      kernels::serial::layer_norm_rows(rows, cols, x.data(), g.data(), b.data(), 1e-12, y.data(), {mean.data(), rstd.data()});
    }
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Arg(64)->Arg(256)->UseRealTime();
BENCHMARK(BM_Softmax<false>)->Arg(4096);
BENCHMARK(BM_Softmax<true>)->Arg(4096)->UseRealTime();
BENCHMARK(BM_LayerNorm<false>)->Arg(4096);
BENCHMARK(BM_LayerNorm<true>)->Arg(4096)->UseRealTime();

BENCHMARK_MAIN();
