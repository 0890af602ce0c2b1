#include <benchmark/benchmark.h>

#include <numeric>

#include "ctxrank/random.hpp"
#include "ctxrank/ranker.hpp"

using namespace ctxrank;

namespace {

RankingData random_data(std::size_t queries) {
  Rng rng(1);
  RankingData d;
  for (std::size_t q = 0; q < queries; ++q) {
    for (int i = 0; i < 10; ++i) {
      for (std::size_t j = 0; j < d.dim; ++j) d.x.push_back(rng.uniform());
      d.gains.push_back(static_cast<int>(rng.below(3)));
      d.base_ranks.push_back(i + 1);
    }
    d.offsets.push_back(d.rows());
  }
  return d;
}

void BM_BatchObjective(benchmark::State& state) {
  const auto kind = static_cast<ModelKind>(state.range(0));
  const auto d = random_data(100);
  Network net(kFeatureDim, 64);
  net.init(1);
  std::vector<std::size_t> batch(100);
  std::iota(batch.begin(), batch.end(), 0);
  std::vector<double> grad(net.params().size());
  for (auto _ : state) benchmark::DoNotOptimize(batch_objective(net, kind, d, batch, grad));
  state.SetLabel(std::string(model_kind_name(kind)));
}
BENCHMARK(BM_BatchObjective)
    ->Arg(static_cast<int>(ModelKind::Regression))
    ->Arg(static_cast<int>(ModelKind::RankNet))
    ->Arg(static_cast<int>(ModelKind::ListNet))
    ->Unit(benchmark::kMicrosecond);

void BM_ForwardRows(benchmark::State& state) {
  const auto d = random_data(100);
  Network net(kFeatureDim, 64);
  net.init(1);
  std::vector<double> s(d.rows());
  for (auto _ : state) {
    net.forward_rows(d.x, d.rows(), s);
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.rows()));
}
BENCHMARK(BM_ForwardRows)->Unit(benchmark::kMicrosecond);

}  // namespace
