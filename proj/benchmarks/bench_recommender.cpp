#include <benchmark/benchmark.h>

#include "embrec/random.hpp"
#include "embrec/recommender.hpp"

namespace {

embrec::EmbeddingMatrix random_matrix(std::size_t rows, std::size_t dim) {
  embrec::Rng rng(1);
  std::vector<std::string> ids;
  std::vector<double> values(rows * dim);
  for (std::size_t i = 0; i < rows; ++i) ids.push_back("item" + std::to_string(i));
  for (double& v : values) v = rng.normal();
  return embrec::EmbeddingMatrix(std::move(ids), dim, std::move(values));
}

// One replay step: a 5-item profile against the rest of the catalog.
void BM_ScoreRows(benchmark::State& state) {
  const auto items = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto m = random_matrix(items, dim);
  std::vector<std::size_t> profile{0, 1, 2, 3, 4};
  std::vector<std::size_t> candidates;
  for (std::size_t i = 5; i < items; ++i) candidates.push_back(i);
  for (auto _ : state) {
    auto scores = embrec::score_rows(m, profile, candidates, embrec::Aggregation::kMax);
    benchmark::DoNotOptimize(scores.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(candidates.size()));
}
BENCHMARK(BM_ScoreRows)->Args({2000, 64})->Args({2000, 2048})->Args({20000, 1024});

void BM_TopK(benchmark::State& state) {
  embrec::Rng rng(2);
  std::vector<embrec::ScoredItem> scored;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    scored.push_back({"item" + std::to_string(i), rng.uniform01()});
  }
  for (auto _ : state) {
    auto top = embrec::top_k(scored, 20);
    benchmark::DoNotOptimize(top.items.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TopK)->Arg(1000)->Arg(100000);

}  // namespace
