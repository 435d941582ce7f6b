#include <benchmark/benchmark.h>

#include "embrec/metrics.hpp"

namespace {

void BM_EvaluateRanking(benchmark::State& state) {
  std::vector<std::string> ranked;
  for (int i = 0; i < 20; ++i) ranked.push_back("item" + std::to_string(i * 3));
  embrec::RelevantSet relevant;
  for (std::int64_t i = 0; i < state.range(0); ++i) relevant.insert("item" + std::to_string(i * 7));
  for (auto _ : state) {
    benchmark::DoNotOptimize(embrec::evaluate_ranking(ranked, relevant, 20));
  }
}
BENCHMARK(BM_EvaluateRanking)->Arg(1)->Arg(10);

}  // namespace
