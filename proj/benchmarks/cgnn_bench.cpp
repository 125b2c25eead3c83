#include <benchmark/benchmark.h>

#include "cgnn/causal.hpp"
#include "cgnn/gnn.hpp"
#include "cgnn/graphs.hpp"
#include "cgnn/metrics.hpp"

namespace {

using namespace cgnn;

Tensor Random(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (double& v : t.values()) v = UniformReal(rng, -1.0, 1.0);
  return t;
}

void BM_MatMul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = Random({n, n}, rng), b = Random({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(MatMul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatMul)->Arg(32)->Arg(128)->Arg(512);

void BM_FwfmLayerForwardBackward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const FwfmShape shape{24, 32, 1, 0.2};
  Rng rng(2);
  ParamStore store;
  InitGraphFwFM(store, shape, rng);
  const Tensor h = Random({shape.num_fields * batch, shape.state_dim}, rng);
  const NeighborMask mask = CompleteMask(shape.num_fields);
  for (auto _ : state) {
    ad::Tape tape;
    ParamBinder p(tape, store);
    ad::Var out = FwfmLayer(p, shape, 0, tape.Constant(h), mask);
    tape.Backward(ad::Sum(out));
    benchmark::DoNotOptimize(p.Gradients());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_FwfmLayerForwardBackward)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<std::uint8_t> labels(n);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = UniformReal(rng, 0, 1) < 0.3;
    scores[i] = UniformReal(rng, 0, 1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(Auc(labels, scores));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Auc)->Arg(10000)->Arg(1000000)->Unit(benchmark::kMillisecond);

void BM_EntityGraph(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::vector<std::vector<std::uint32_t>> exposures(n);
  for (auto& e : exposures) {
    for (std::uint32_t item = 0; item < 500; ++item) {
      if (UniformReal(rng, 0, 1) < 0.02) e.push_back(item);
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(BuildEntityGraph(exposures));
}
BENCHMARK(BM_EntityGraph)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_Acyclicity(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  const Tensor w = Random({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(Acyclicity(w, 1.0 / static_cast<double>(n)));
}
BENCHMARK(BM_Acyclicity)->Arg(8)->Arg(39);

}  // namespace

BENCHMARK_MAIN();
