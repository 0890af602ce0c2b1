#include <benchmark/benchmark.h>

#include <numeric>

#include "ctxrank/evaluator.hpp"
#include "ctxrank/random.hpp"

using namespace ctxrank;

namespace {

void BM_NdcgAt(benchmark::State& state) {
  Rng rng(3);
  std::vector<int> gains(10), order(10);
  for (auto& g : gains) g = static_cast<int>(rng.below(3));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<int>(order));
  for (auto _ : state) benchmark::DoNotOptimize(ndcg_at(order, gains));
}
BENCHMARK(BM_NdcgAt);

void BM_KendallTau(benchmark::State& state) {
  Rng rng(4);
  std::vector<std::int64_t> a(10), b(10);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  rng.shuffle(std::span<std::int64_t>(b));
  for (auto _ : state) benchmark::DoNotOptimize(kendall_tau(a, b));
}
BENCHMARK(BM_KendallTau);

}  // namespace
