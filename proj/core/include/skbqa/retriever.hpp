#pragma once
// Retrieval modules: text (VSS over all documents), hybrid (ego-graph
// intersection ranked by VSS) and the personalized PageRank baseline.

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "skbqa/skb.hpp"
#include "skbqa/vector_index.hpp"

namespace skbqa {

enum class Selection { text, hybrid };
enum class ModuleKind { text, hybrid, ppr };

std::string_view to_string(Selection s);
std::string_view to_string(ModuleKind m);

// A topic-entity mention together with every entity it grounded to.
struct GroundedMention {
  std::string text;
  std::string etype;             // type claimed by the extraction
  std::vector<std::string> ids;  // resolve_by_name order; may be empty

  friend bool operator==(const GroundedMention&, const GroundedMention&) = default;
};

struct RoutingDecision {
  Selection selection = Selection::text;
  std::vector<GroundedMention> topic_entities;
  std::vector<std::string> useful_relations;
  std::string raw_llm_text;  // extraction output, then a blank line, then the selection output

  std::size_t grounded_mention_count() const;
  std::size_t grounded_entity_count() const;
  // Same (selection, mentions, relations); raw text ignored.
  bool same_action(const RoutingDecision& other) const;
};

struct RetrievalDiagnostics {
  bool empty_extraction = false;
  bool empty_intersection = false;
  std::size_t pool_size = 0;
  bool truncated_paths = false;

  friend bool operator==(const RetrievalDiagnostics&, const RetrievalDiagnostics&) = default;
};

struct RetrievalResult {
  ModuleKind module = ModuleKind::text;
  std::vector<ScoredId> ranked;
  std::vector<std::string> candidate_pool;  // hybrid only, sorted
  std::map<std::string, PathSet> per_candidate_paths;  // hybrid only
  RetrievalDiagnostics diagnostics;

  std::vector<std::string> ranked_ids() const;
};

struct RetrievalParams {
  std::size_t k = 20;
  int radius = 2;
  std::size_t max_paths = kDefaultPathCap;
};

RetrievalResult text_retrieve(std::string_view question, const DocIndex& index,
                              EmbeddingProvider& provider, std::size_t k);

// Candidate pool = intersection across grounded mentions of (union over the
// mention's ids of ego_graph(id, R, radius)). Pool members with documents are
// ranked by cosine(question, doc). Mentions with no grounded ids contribute no
// ego-graph.
RetrievalResult hybrid_retrieve(std::string_view question, const Skb& skb, const DocIndex& index,
                                EmbeddingProvider& provider, const RoutingDecision& decision,
                                const RetrievalParams& params);

struct PprParams {
  double alpha = 0.15;  // restart probability
  double tolerance = 1e-10;
  int max_iterations = 1000;
};

// Stationary scores for every entity (indexed by EntityId), undirected edges,
// uniform restart over seeds; dangling mass restarts.
std::vector<double> personalized_pagerank(const Skb& skb, const EntitySet& seeds,
                                          const PprParams& params);

// Top-k entities by PPR score, seeds excluded; zero-score entities omitted.
RetrievalResult ppr_retrieve(const Skb& skb, const EntitySet& seeds, std::size_t k,
                             const PprParams& params = {});

}  // namespace skbqa
