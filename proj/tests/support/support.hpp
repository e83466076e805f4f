#pragma once
// Fixtures and independent oracles shared by the unit and acceptance tests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "skbqa/agent.hpp"
#include "skbqa/llm.hpp"
#include "skbqa/skb.hpp"
#include "skbqa/vector_index.hpp"

namespace skbqa::testing {

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_text(const std::filesystem::path& p);
void write_text(const std::filesystem::path& p, const std::string& text);

struct RandomGraph {
  std::vector<Entity> entities;
  std::vector<EdgeRecord> edges;
  std::vector<std::string> relation_types;
};

// Entities "e000".., relation types "r0".., edges drawn uniformly (self loops
// and parallel edges allowed). About half the entities carry a document.
RandomGraph random_graph(std::uint64_t seed, std::size_t entities, std::size_t relation_types,
                         std::size_t edges);

// Entities within `radius` hops of `seed` over edges with a relation in
// `rels`, either direction, seed excluded. Computed by sweeping the whole
// edge list once per hop.
std::set<std::string> oracle_ego(const std::vector<EdgeRecord>& edges, const std::string& seed,
                                 const std::set<std::string>& rels, int radius);

// Personalized PageRank by solving the linear system
// (I - (1 - alpha) * T) p = alpha * r with Gaussian elimination, where T is
// the undirected random-walk matrix (one step per edge end) and dangling
// nodes jump to the restart distribution r (uniform over seeds).
std::vector<double> oracle_ppr(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                               const std::vector<std::size_t>& seeds, double alpha);

// Three authors, four papers with documents, two venues.
//   A1 Ada Lovelace writes P1, P4; A2 Alan Turing writes P2, P4;
//   A3 Grace Hopper writes P3; P1, P2 in V1 Royal Society; P3, P4 in V2 ACM;
//   P4 cites P1.
Skb mini_skb();

inline constexpr const char* kMiniQuestion =
    "Which paper by Ada Lovelace published in ACM is about symbolic computation?";
inline constexpr const char* kMiniAnswer = "P4";

// The mini SKB with its index, the shipped prompts and no examples.
struct MiniWorld {
  MiniWorld();
  MiniWorld(const MiniWorld&) = delete;
  MiniWorld& operator=(const MiniWorld&) = delete;

  Skb skb;
  HashEmbedder embedder;
  DocIndex index;
  PromptLibrary prompts;
  std::vector<FewShotExample> fewshot;
  std::vector<Experience> experiences;

  AgentResources resources();
};

// Router and critic responses for kMiniQuestion. The first extraction names
// the wrong venue (Royal Society), the validator rejects P1, the commenter
// flags the venue and the re-extraction names ACM, whose pool ranks P4 first.
// The generic redo message also yields the correct extraction.
std::vector<ScriptEntry> mini_refinement_script();
// As above, but every validation is rejected.
std::vector<ScriptEntry> mini_rejecting_script();

std::filesystem::path prompts_dir();
std::filesystem::path golden_dir();

ScriptEntry match(std::string substring, std::string response);
ScriptEntry nth(int ordinal, std::string response);

}  // namespace skbqa::testing
