#include <benchmark/benchmark.h>

#include "embrec/multitask_head.hpp"
#include "embrec/random.hpp"

namespace {

struct Batch {
  embrec::MultitaskModel model;
  embrec::Matrix features;
  std::vector<embrec::TargetColumn> targets;
};

// Head over 2048-d base features with a 1024-unit shared layer, one
// 47-class task and one regression task.
Batch make_batch(std::size_t rows) {
  embrec::Rng rng(3);
  auto model = embrec::MultitaskModel::initialize(
      2048, 1024,
      {embrec::TaskSpec::classification("type", 47), embrec::TaskSpec::regression("year")}, 4);
  embrec::Matrix x(rows, 2048);
  for (double& v : x.data()) v = rng.normal();
  std::vector<std::size_t> cls(rows);
  std::vector<double> year(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    cls[i] = rng.uniform_index(47);
    year[i] = rng.normal();
  }
  return {std::move(model), std::move(x), {cls, year}};
}

void BM_Forward(benchmark::State& state) {
  const auto b = make_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto f = embrec::forward(b.model, b.features);
    benchmark::DoNotOptimize(f.shared.data().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Backward(benchmark::State& state) {
  const auto b = make_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto g = embrec::backward(b.model, b.features, b.targets);
    benchmark::DoNotOptimize(g.loss.total);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Backward)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_AdamStep(benchmark::State& state) {
  auto b = make_batch(1);
  auto moments = embrec::AdamMoments::for_model(b.model);
  const auto grads = embrec::backward(b.model, b.features, b.targets).gradients;
  std::size_t step = 0;
  for (auto _ : state) {
    embrec::adam_step(b.model, grads, embrec::AdamSettings{}, ++step, moments);
  }
}
BENCHMARK(BM_AdamStep)->Unit(benchmark::kMillisecond);

}  // namespace
