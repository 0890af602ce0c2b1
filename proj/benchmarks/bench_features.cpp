#include <benchmark/benchmark.h>

#include <sstream>

#include "ctxrank/context_index.hpp"
#include "ctxrank/features.hpp"
#include "ctxrank/partitioner.hpp"
#include "ctxrank/synthgen.hpp"

using namespace ctxrank;

namespace {

struct Data {
  std::vector<Session> sessions;
  SessionOrder order;
  ContextIndex index;
  TargetSet targets;
  int train_days = 27;
};

const Data& data() {
  static const Data d = [] {
    GenConfig c;
    c.n_users = 500;
    std::ostringstream out;
    generate(c, out);
    Data x;
    x.sessions = sessionize(parse_log(out.str()));
    label_sessions(x.sessions);
    x.train_days = c.train_days();
    x.order = SessionOrder::build(x.sessions, 1);
    x.index = ContextIndex::build(x.sessions, x.order, x.train_days);
    x.targets = select_targets(x.order, x.train_days);
    return x;
  }();
  return d;
}

void BM_BuildIndex(benchmark::State& state) {
  const auto& d = data();
  for (auto _ : state) benchmark::DoNotOptimize(ContextIndex::build(d.sessions, d.order, d.train_days));
}
BENCHMARK(BM_BuildIndex)->Unit(benchmark::kMillisecond);

void BM_ExtractTargets(benchmark::State& state) {
  const auto& d = data();
  const Corpus corpus(d.sessions);
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_targets(corpus, d.order, d.index, d.targets, 1));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.targets.all().size()));
}
BENCHMARK(BM_ExtractTargets)->Unit(benchmark::kMillisecond);

void BM_ParseLog(benchmark::State& state) {
  GenConfig c;
  c.n_users = 200;
  std::ostringstream out;
  generate(c, out);
  const std::string text = out.str();
  for (auto _ : state) benchmark::DoNotOptimize(parse_log(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseLog)->Unit(benchmark::kMillisecond);

}  // namespace
