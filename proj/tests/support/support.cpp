#include "support.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "skbqa/rng.hpp"

namespace skbqa::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "skbqa-test-XXXXXX").string();
  if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

RandomGraph random_graph(std::uint64_t seed, std::size_t entities, std::size_t relation_types,
                         std::size_t edges) {
  Rng rng(seed);
  RandomGraph g;
  for (std::size_t r = 0; r < relation_types; ++r) g.relation_types.push_back(fmt::format("r{}", r));
  for (std::size_t i = 0; i < entities; ++i) {
    Entity e{fmt::format("e{:03}", i), rng.chance(0.5) ? "alpha" : "beta",
             fmt::format("entity {}", i), std::nullopt};
    if (rng.chance(0.5)) e.doc = fmt::format("document {} about topic {}", i, rng.below(7));
    g.entities.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < edges; ++i) {
    g.edges.push_back({g.entities[rng.below(entities)].id,
                       g.relation_types[rng.below(relation_types)],
                       g.entities[rng.below(entities)].id});
  }
  return g;
}

std::set<std::string> oracle_ego(const std::vector<EdgeRecord>& edges, const std::string& seed,
                                 const std::set<std::string>& rels, int radius) {
  std::map<std::string, int> dist{{seed, 0}};
  for (int hop = 1; hop <= radius; ++hop) {
    std::vector<std::string> found;
    for (const auto& e : edges) {
      if (rels.count(e.rel) == 0) continue;
      for (const auto& [from, to] : {std::pair{e.src, e.dst}, std::pair{e.dst, e.src}}) {
        auto it = dist.find(from);
        if (it != dist.end() && it->second == hop - 1 && dist.count(to) == 0) found.push_back(to);
      }
    }
    for (const auto& f : found) dist.emplace(f, hop);
  }
  std::set<std::string> out;
  for (const auto& [id, d] : dist) {
    if (id != seed) out.insert(id);
  }
  return out;
}

std::vector<double> oracle_ppr(std::size_t n,
                               const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                               const std::vector<std::size_t>& seeds, double alpha) {
  std::set<std::size_t> seed_set(seeds.begin(), seeds.end());
  std::vector<double> r(n, 0.0);
  for (auto s : seed_set) r[s] = 1.0 / static_cast<double>(seed_set.size());
  std::vector<double> deg(n, 0.0);
  std::vector<std::vector<double>> count(n, std::vector<double>(n, 0.0));
  for (auto [u, v] : edges) {
    count[u][v] += 1.0;
    count[v][u] += 1.0;
    deg[u] += 1.0;
    deg[v] += 1.0;
  }
  // T[v][u]: probability of stepping u -> v.
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t u = 0; u < n; ++u) {
      double t = deg[u] > 0 ? count[u][v] / deg[u] : r[v];
      a[v][u] = (v == u ? 1.0 : 0.0) - (1.0 - alpha) * t;
    }
    a[v][n] = alpha * r[v];
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < n; ++row) {
      if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
    }
    std::swap(a[col], a[pivot]);
    for (std::size_t row = 0; row < n; ++row) {
      if (row == col) continue;
      double f = a[row][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t k = col; k <= n; ++k) a[row][k] -= f * a[col][k];
    }
  }
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = a[i][n] / a[i][i];
  return p;
}

Skb mini_skb() {
  std::vector<Entity> entities{
      {"A1", "author", "Ada Lovelace", std::nullopt},
      {"A2", "author", "Alan Turing", std::nullopt},
      {"A3", "author", "Grace Hopper", std::nullopt},
      {"P1", "paper", "Analytical engines", "Analytical engines for symbolic computation."},
      {"P2", "paper", "Computable numbers",
       "On computable numbers with an application to decision problems."},
      {"P3", "paper", "Compilers for business", "Compilers for business data processing languages."},
      {"P4", "paper", "Engine notes",
       "Notes on the analytical engine and symbolic computation in practice."},
      {"V1", "venue", "Royal Society", std::nullopt},
      {"V2", "venue", "ACM", std::nullopt},
  };
  std::vector<EdgeRecord> edges{
      {"A1", "writes", "P1"},       {"A1", "writes", "P4"},       {"A2", "writes", "P2"},
      {"A2", "writes", "P4"},       {"A3", "writes", "P3"},       {"P1", "published_in", "V1"},
      {"P2", "published_in", "V1"}, {"P3", "published_in", "V2"}, {"P4", "published_in", "V2"},
      {"P4", "cites", "P1"},
  };
  return Skb::build(std::move(entities), std::move(edges), {"author", "paper", "venue"},
                    {"cites", "published_in", "writes"});
}

MiniWorld::MiniWorld()
    : skb(mini_skb()), index(build_index(skb, embedder)), prompts(PromptLibrary::load(prompts_dir())) {}

AgentResources MiniWorld::resources() {
  return AgentResources{skb, index, embedder, prompts, fewshot, experiences, {}, {}, {}};
}

namespace {

std::vector<ScriptEntry> mini_router_script() {
  const std::string wrong =
      "Entity: Ada Lovelace (author)\nEntity: Royal Society (venue)\nRelation: writes\n"
      "Relation: published_in";
  const std::string right =
      "Entity: Ada Lovelace (author)\nEntity: ACM (venue)\nRelation: writes\n"
      "Relation: published_in";
  return {
      match("Entity Type: author", wrong),
      match("Feedback: Entity Royal Society is incorrect", right),
      match(std::string("Feedback: ") + kSimpleFeedback, right),
      match("narrow down the search space", "knowledge graph"),
      match("Topic Entities: Ada Lovelace (author), Royal Society (venue)",
            "Entity Royal Society is incorrect."),
  };
}

}  // namespace

std::vector<ScriptEntry> mini_refinement_script() {
  auto s = mini_router_script();
  s.push_back(match("### Document: Analytical engines for", "no"));
  s.push_back(match("### Document: Notes on the analytical engine", "yes"));
  return s;
}

std::vector<ScriptEntry> mini_rejecting_script() {
  auto s = mini_router_script();
  s.push_back(match("### Document:", "no"));
  s.push_back(match("Topic Entities: Ada Lovelace (author), ACM (venue)",
                    "Entity ACM is incorrect."));
  s.push_back(match("Feedback: Entity ACM is incorrect",
                    "Entity: Ada Lovelace (author)\nEntity: Royal Society (venue)\n"
                    "Relation: writes\nRelation: published_in"));
  return s;
}

fs::path prompts_dir() { return SKBQA_TEST_PROMPTS_DIR; }
fs::path golden_dir() { return SKBQA_TEST_GOLDEN_DIR; }

ScriptEntry match(std::string substring, std::string response) {
  ScriptEntry e;
  e.substring = std::move(substring);
  e.response = std::move(response);
  return e;
}

ScriptEntry nth(int ordinal, std::string response) {
  ScriptEntry e;
  e.ordinal = ordinal;
  e.response = std::move(response);
  return e;
}

}  // namespace skbqa::testing
