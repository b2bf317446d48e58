#include <benchmark/benchmark.h>

#include <cstddef>
#include <random>
#include <vector>

#include "fromage/kernels.hpp"

namespace {

namespace k = fromage::kernels;

std::vector<double> random_buffer(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  std::vector<double> out(n);
  for (double& v : out) v = dist(rng);
  return out;
}

// Shapes come from a batch-250 forward pass through a 256-wide layer and the
// matching weight-gradient product.
template <typename Fn>
void run_gemm(benchmark::State& state, Fn fn) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto kk = static_cast<std::size_t>(state.range(2));
  const auto a = random_buffer(m * kk, 1);
  const auto b = random_buffer(kk * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    fn(m, n, kk, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.counters["GFLOPS"] = benchmark::Counter(
      2.0 * static_cast<double>(m * n * kk), benchmark::Counter::kIsIterationInvariantRate,
      benchmark::Counter::kIs1000);
}

void BM_GemmReference(benchmark::State& state) {
  run_gemm(state, [](auto m, auto n, auto kk, auto a, auto b, auto c) {
    k::reference::gemm(m, n, kk, a, b, c);
  });
}

void BM_GemmBlockedSerial(benchmark::State& state) {
  run_gemm(state, [](auto m, auto n, auto kk, auto a, auto b, auto c) {
    k::gemm(m, n, kk, a, b, c, k::Exec::serial);
  });
}

void BM_GemmBlockedParallel(benchmark::State& state) {
  state.counters["threads"] = k::max_threads();
  run_gemm(state, [](auto m, auto n, auto kk, auto a, auto b, auto c) {
    k::gemm(m, n, kk, a, b, c, k::Exec::parallel);
  });
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({256, 250, 256})->Args({256, 250, 784})->Args({256, 256, 250})->Args({10, 250, 256});
}

BENCHMARK(BM_GemmReference)->Apply(shapes);
BENCHMARK(BM_GemmBlockedSerial)->Apply(shapes);
BENCHMARK(BM_GemmBlockedParallel)->Apply(shapes);

}  // namespace

BENCHMARK_MAIN();
