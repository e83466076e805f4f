#include "skbqa/retriever.hpp"

#include <algorithm>
#include <cmath>

#include "skbqa/error.hpp"

namespace skbqa {

std::string_view to_string(Selection s) { return s == Selection::hybrid ? "hybrid" : "text"; }

std::string_view to_string(ModuleKind m) {
  switch (m) {
    case ModuleKind::text:
      return "text";
    case ModuleKind::hybrid:
      return "hybrid";
    case ModuleKind::ppr:
      return "ppr";
  }
  return "text";
}

std::size_t RoutingDecision::grounded_mention_count() const {
  return static_cast<std::size_t>(std::count_if(topic_entities.begin(), topic_entities.end(),
                                                [](const auto& m) { return !m.ids.empty(); }));
}

std::size_t RoutingDecision::grounded_entity_count() const {
  std::size_t n = 0;
  for (const auto& m : topic_entities) n += m.ids.size();
  return n;
}

bool RoutingDecision::same_action(const RoutingDecision& other) const {
  return selection == other.selection && topic_entities == other.topic_entities &&
         useful_relations == other.useful_relations;
}

std::vector<std::string> RetrievalResult::ranked_ids() const {
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(r.id);
  return out;
}

RetrievalResult text_retrieve(std::string_view question, const DocIndex& index,
                              EmbeddingProvider& provider, std::size_t k) {
  if (index.empty()) throw InvalidArgument("text_retrieve: empty index");
  RetrievalResult r;
  r.module = ModuleKind::text;
  r.ranked = index.top_k(provider.embed(question), k);
  return r;
}

RetrievalResult hybrid_retrieve(std::string_view question, const Skb& skb, const DocIndex& index,
                                EmbeddingProvider& provider, const RoutingDecision& decision,
                                const RetrievalParams& params) {
  RetrievalResult r;
  r.module = ModuleKind::hybrid;

  RelationSet rels;
  for (const auto& label : decision.useful_relations) {
    if (auto id = skb.find_relation(label)) rels.push_back(*id);
  }
  std::sort(rels.begin(), rels.end());
  rels.erase(std::unique(rels.begin(), rels.end()), rels.end());

  EntitySet seeds;
  std::vector<EntitySet> groups;
  for (const auto& mention : decision.topic_entities) {
    if (mention.ids.empty()) continue;
    EntitySet group;
    for (const auto& id : mention.ids) {
      auto e = skb.require(id);
      seeds.push_back(e);
      if (rels.empty()) continue;
      auto ego = skb.ego_graph(e, rels, params.radius);
      EntitySet merged;
      std::set_union(group.begin(), group.end(), ego.begin(), ego.end(),
                     std::back_inserter(merged));
      group = std::move(merged);
    }
    groups.push_back(std::move(group));
  }
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  if (groups.empty() || rels.empty()) {
    r.diagnostics.empty_extraction = true;
    return r;
  }

  EntitySet pool = intersect_candidates(groups);
  r.diagnostics.pool_size = pool.size();
  if (pool.empty()) {
    r.diagnostics.empty_intersection = true;
    return r;
  }
  for (auto e : pool) r.candidate_pool.push_back(skb.entity(e).id);

  Vector q = provider.embed(question);
  for (auto e : pool) {
    const auto& id = skb.entity(e).id;
    if (const Vector* v = index.find(id)) r.ranked.push_back({id, cosine(q, *v)});
  }
  std::sort(r.ranked.begin(), r.ranked.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (r.ranked.size() > params.k) r.ranked.resize(params.k);

  for (const auto& cand : r.ranked) {
    auto target = skb.require(cand.id);
    PathSet merged;
    for (auto seed : seeds) {
      auto ps = skb.reasoning_paths(seed, target, rels, params.radius, params.max_paths);
      merged.truncated = merged.truncated || ps.truncated;
      for (auto& p : ps.paths) merged.paths.push_back(std::move(p));
    }
    std::sort(merged.paths.begin(), merged.paths.end(),
              [](const ReasoningPath& a, const ReasoningPath& b) {
                if (a.hops() != b.hops()) return a.hops() < b.hops();
                return a < b;
              });
    if (merged.paths.size() > params.max_paths) {
      merged.paths.resize(params.max_paths);
      merged.truncated = true;
    }
    r.diagnostics.truncated_paths = r.diagnostics.truncated_paths || merged.truncated;
    r.per_candidate_paths.emplace(cand.id, std::move(merged));
  }
  return r;
}

std::vector<double> personalized_pagerank(const Skb& skb, const EntitySet& seed_list,
                                          const PprParams& params) {
  EntitySet seeds = seed_list;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  if (seeds.empty()) throw InvalidArgument("ppr: empty seed set");
  if (!(params.alpha > 0.0 && params.alpha < 1.0)) {
    throw InvalidArgument("ppr: alpha must lie in (0, 1)");
  }
  const std::size_t n = skb.entity_count();
  std::vector<double> restart(n, 0.0);
  for (auto s : seeds) restart.at(s.value) = 1.0 / static_cast<double>(seeds.size());

  // Undirected incidence: each edge end contributes one step.
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (std::uint32_t u = 0; u < n; ++u) {
    for (const auto& h : skb.out_edges(EntityId{u})) {
      adj[u].push_back(h.other.value);
      adj[h.other.value].push_back(u);
    }
  }

  std::vector<double> p = restart;
  std::vector<double> next(n);
  for (int it = 0; it < params.max_iterations; ++it) {
    double dangling = 0.0;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t u = 0; u < n; ++u) {
      if (p[u] == 0.0) continue;
      if (adj[u].empty()) {
        dangling += p[u];
        continue;
      }
      double share = p[u] / static_cast<double>(adj[u].size());
      for (auto v : adj[u]) next[v] += share;
    }
    double delta = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      double v = params.alpha * restart[u] + (1.0 - params.alpha) * (next[u] + dangling * restart[u]);
      delta += std::abs(v - p[u]);
      next[u] = v;
    }
    p.swap(next);
    if (delta < params.tolerance) break;
  }
  return p;
}

RetrievalResult ppr_retrieve(const Skb& skb, const EntitySet& seed_list, std::size_t k,
                             const PprParams& params) {
  if (k == 0) throw InvalidArgument("ppr_retrieve: k must be at least 1");
  EntitySet seeds = seed_list;
  std::sort(seeds.begin(), seeds.end());
  auto scores = personalized_pagerank(skb, seeds, params);
  RetrievalResult r;
  r.module = ModuleKind::ppr;
  for (std::uint32_t u = 0; u < scores.size(); ++u) {
    if (scores[u] <= 0.0 || std::binary_search(seeds.begin(), seeds.end(), EntityId{u})) continue;
    r.ranked.push_back({skb.entity(EntityId{u}).id, scores[u]});
  }
  std::stable_sort(r.ranked.begin(), r.ranked.end(),
                   [](const ScoredId& a, const ScoredId& b) { return a.score > b.score; });
  if (r.ranked.size() > k) r.ranked.resize(k);
  return r;
}

}  // namespace skbqa
