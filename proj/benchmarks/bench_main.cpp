#include <benchmark/benchmark.h>

#include <vector>

#include "bvecchia/bvecchia.hpp"

namespace bv = bvecchia;

namespace {

const bv::MaternParams kTheta{1.0, 0.052537, 1.5};

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
  bv::CounterRng rng(seed, 6);
  std::vector<double> y(n);
  for (double& v : y) v = rng.normal();
  return y;
}

bv::DenseMatrix spd(std::size_t n) {
  const auto pts = bv::uniform_locations(n, 2, n);
  return bv::cov_matrix(bv::MaternParams{1.0, 0.1, 0.5}, pts);
}

}  // namespace

// Args: n, bc, cs, threads.
static void BM_BlockLoglik(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto bc = static_cast<std::size_t>(state.range(1));
  const auto cs = static_cast<std::size_t>(state.range(2));
  const bv::Parallelism par{static_cast<std::size_t>(state.range(3))};
  const auto pts = bv::uniform_locations(n, 2, 1);
  const auto plan = bv::build_plan(pts, {.bc = bc, .cs = cs, .ordering = bv::Ordering::random, .seed = 1});
  const auto y = white_noise(n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(bv::block_loglik(plan, y, kTheta, par).loglik);
  const double flops = bv::complexity_estimate(n, bc, cs).flops_block;
  state.counters["model_flops"] = benchmark::Counter(flops, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_BlockLoglik)
    ->ArgsProduct({{20000}, {1500}, {30, 60, 120}, {1}})
    ->Args({2000, 2000, 30, 1})
    ->Args({2000, 150, 60, 1})
    ->Unit(benchmark::kMillisecond);

static void BM_BuildPlan(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto bc = static_cast<std::size_t>(state.range(1));
  const auto pts = bv::uniform_locations(n, 2, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bv::build_plan(pts, {.bc = bc, .cs = 60, .ordering = bv::Ordering::random, .seed = 2}));
  }
}
BENCHMARK(BM_BuildPlan)->Args({20000, 1500})->Args({2000, 150})->Unit(benchmark::kMillisecond);

static void BM_Cholesky(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = spd(n);
  for (auto _ : state) benchmark::DoNotOptimize(bv::cholesky(a, 1.0).lower.data().data());
  state.counters["flops"] =
      benchmark::Counter(static_cast<double>(n * n * n) / 3.0, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Cholesky)->RangeMultiplier(4)->Range(16, 1024);

static void BM_BatchedCholesky(benchmark::State& state) {
  const auto threads = static_cast<std::size_t>(state.range(0));
  std::vector<bv::DenseMatrix> mats;
  for (std::size_t i = 0; i < 1500; ++i) mats.push_back(spd(13 + i % 4));
  for (auto _ : state) {
    auto out = bv::batched_apply(mats.size(), [&](std::size_t i) { return bv::cholesky(mats[i], 1.0).jitter_applied; },
                                 bv::Parallelism{threads});
    benchmark::DoNotOptimize(out.results.data());
  }
}
BENCHMARK(BM_BatchedCholesky)->Arg(1)->Arg(8)->Unit(benchmark::kMicrosecond);

// Args: 10 * nu, kernel mode.
static void BM_Matern(benchmark::State& state) {
  const double nu = static_cast<double>(state.range(0)) / 10.0;
  const auto mode = static_cast<bv::MaternKernel::Mode>(state.range(1));
  const bv::MaternKernel k({1.0, 0.05, nu}, mode);
  double d = 0.0;
  for (auto _ : state) {
    d = d > 0.5 ? 1e-4 : d + 1.37e-3;
    benchmark::DoNotOptimize(k(d));
  }
}
BENCHMARK(BM_Matern)->ArgsProduct({{5, 13, 15}, {0, 1, 2}});

static void BM_KMeans(benchmark::State& state) {
  const auto pts = bv::uniform_locations(static_cast<std::size_t>(state.range(0)), 2, 3);
  for (auto _ : state) benchmark::DoNotOptimize(bv::kmeans_cluster(pts, static_cast<std::size_t>(state.range(1)), 3));
}
BENCHMARK(BM_KMeans)->Args({20000, 1500})->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
