#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "sgl/graph.hpp"
#include "sgl/loss.hpp"
#include "sgl/model.hpp"
#include "sgl/train.hpp"

namespace {

using namespace sgl;

// Users and items at the given density; roughly users * items * density edges.
InteractionGraph synthetic(Index users, Index items, double density, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::bernoulli_distribution coin(density);
  std::vector<Edge> edges;
  for (Index u = 0; u < users; ++u)
    for (Index i = 0; i < items; ++i)
      if (coin(gen)) edges.push_back({u, i});
  return InteractionGraph(users, items, std::move(edges));
}

void BM_Propagate(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const auto g = synthetic(n, n, 10.0 / static_cast<double>(n), 1);
  const auto chain = AdjacencyChain::shared(
      std::make_shared<const NormalizedAdjacency>(build_normalized_adjacency(g)), 3);
  const auto table = init_embeddings(n, n, 64, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(chain, table));
  state.counters["edges"] = static_cast<double>(g.num_edges());
}
BENCHMARK(BM_Propagate)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_EdgeDropoutView(benchmark::State& state) {
  const auto g = synthetic(10000, 10000, 1e-3, 2);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(edge_dropout(g, 0.1, ++seed));
}
BENCHMARK(BM_EdgeDropoutView)->Unit(benchmark::kMillisecond);

void BM_InfoNce(benchmark::State& state) {
  const auto scope = static_cast<NegativeScope>(state.range(0));
  const Index m = 2000;
  const Index n = 2000;
  const auto g = synthetic(m, n, 5e-3, 3);
  const auto t1 = init_embeddings(m, n, 64, 1);
  const auto t2 = init_embeddings(m, n, 64, 2);
  const FinalRepresentations r1{t1.values, m};
  const FinalRepresentations r2{t2.values, m};
  Rng rng(4);
  const auto batch = sample_bpr_batch(g, 2048, rng);
  const auto sets = ssl_node_sets(batch, m, n, scope);
  for (auto _ : state) benchmark::DoNotOptimize(ssl_loss_and_grad(r1, r2, sets, 0.2));
  state.SetLabel(to_string(scope));
}
BENCHMARK(BM_InfoNce)
    ->Arg(static_cast<int>(NegativeScope::kBatchTyped))
    ->Arg(static_cast<int>(NegativeScope::kBatchMerged))
    ->Arg(static_cast<int>(NegativeScope::kFull))
    ->Unit(benchmark::kMillisecond);

// One training epoch; range(0) selects LightGCN (0) or SGL-ED (1).
void BM_Epoch(benchmark::State& state) {
  const bool ssl = state.range(0) == 1;
  const auto g = synthetic(1000, 1000, 0.01, 5);
  TrainConfig c;
  c.record_timing = false;
  const auto full = AdjacencyChain::shared(
      std::make_shared<const NormalizedAdjacency>(build_normalized_adjacency(g)), c.layers);
  TrainerState trainer = make_trainer_state(init_embeddings(1000, 1000, c.dim, 1), c.lr);
  Rng rng(6);
  const ObjectiveWeights w{true, ssl ? c.lambda1 : 0.0, c.lambda2, c.tau, c.scope};
  int epoch = 0;
  for (auto _ : state) {
    ++epoch;
    std::optional<ViewPair> views;
    if (ssl) views = make_epoch_views(g, AugmentOperator::kEdgeDropout, c.rho, c.layers, 7, epoch);
    benchmark::DoNotOptimize(train_epoch(trainer, g, full, views ? &*views : nullptr, w, c, epoch, rng));
  }
  state.SetLabel(ssl ? "sgl-ed" : "lightgcn");
}
BENCHMARK(BM_Epoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
