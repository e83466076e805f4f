// Micro benchmarks for the graph, vector and PageRank hot paths over random
// knowledge bases of 1k and 10k entities with average degree 6.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>
#include <fmt/core.h>

#include "skbqa/retriever.hpp"
#include "skbqa/rng.hpp"
#include "skbqa/skb.hpp"
#include "skbqa/vector_index.hpp"

namespace skbqa {
namespace {

struct World {
  Skb skb;
  HashEmbedder embedder;
  DocIndex index;
  RelationSet rels;

  World(Skb s) : skb(std::move(s)), index(build_index(skb, embedder)) {
    rels = {skb.require_relation("r0"), skb.require_relation("r1")};
  }
};

Skb random_skb(std::size_t n) {
  Rng rng(n);
  std::vector<Entity> entities;
  for (std::size_t i = 0; i < n; ++i) {
    entities.push_back({fmt::format("e{}", i), "node", fmt::format("entity {}", i),
                        fmt::format("document {} on topic {} and theme {}", i, rng.below(50),
                                    rng.below(20))});
  }
  std::vector<EdgeRecord> edges;
  for (std::size_t i = 0; i < 3 * n; ++i) {
    edges.push_back({entities[rng.below(n)].id, fmt::format("r{}", rng.below(4)),
                     entities[rng.below(n)].id});
  }
  return Skb::build(std::move(entities), std::move(edges));
}

World& world(std::size_t n) {
  static std::map<std::size_t, std::unique_ptr<World>> cache;
  auto& w = cache[n];
  if (!w) w = std::make_unique<World>(random_skb(n));
  return *w;
}

void BM_EgoGraph(benchmark::State& state) {
  auto& w = world(static_cast<std::size_t>(state.range(0)));
  int radius = static_cast<int>(state.range(1));
  EntityId seed{7};
  for (auto _ : state) {
    benchmark::DoNotOptimize(w.skb.ego_graph(seed, w.rels, radius));
  }
}
BENCHMARK(BM_EgoGraph)->Args({1000, 1})->Args({1000, 2})->Args({10000, 1})->Args({10000, 2});

void BM_TopK(benchmark::State& state) {
  auto& w = world(static_cast<std::size_t>(state.range(0)));
  auto query = w.embedder.embed_one("document on topic 12 and theme 3");
  for (auto _ : state) {
    benchmark::DoNotOptimize(w.index.top_k(query, 20));
  }
}
BENCHMARK(BM_TopK)->Arg(1000)->Arg(10000);

void BM_Ppr(benchmark::State& state) {
  auto& w = world(static_cast<std::size_t>(state.range(0)));
  EntitySet seeds{EntityId{7}, EntityId{11}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(ppr_retrieve(w.skb, seeds, 20));
  }
}
BENCHMARK(BM_Ppr)->Arg(1000)->Arg(10000);

}  // namespace
}  // namespace skbqa

BENCHMARK_MAIN();
