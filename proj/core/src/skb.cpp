#include "skbqa/skb.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>

#include <nlohmann/json.hpp>

#include "skbqa/error.hpp"

namespace skbqa {

using nlohmann::json;

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

namespace {

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

Skb Skb::build(std::vector<Entity> entities, std::vector<EdgeRecord> edges,
               std::vector<std::string> entity_types, std::vector<std::string> relation_types) {
  Skb skb;
  skb.explicit_schema_ = !entity_types.empty() || !relation_types.empty();

  std::sort(entities.begin(), entities.end(),
            [](const Entity& a, const Entity& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < entities.size(); ++i) {
    if (entities[i].id == entities[i - 1].id) {
      throw InvalidArgument("duplicate entity id \"" + entities[i].id + "\"");
    }
  }

  if (entity_types.empty()) {
    for (const auto& e : entities) entity_types.push_back(e.etype);
  }
  if (relation_types.empty()) {
    for (const auto& e : edges) relation_types.push_back(e.rel);
  }
  skb.entity_types_ = sorted_unique(std::move(entity_types));
  skb.relation_types_ = sorted_unique(std::move(relation_types));

  skb.by_id_.reserve(entities.size());
  for (std::uint32_t i = 0; i < entities.size(); ++i) {
    const auto& e = entities[i];
    if (!skb.has_entity_type(e.etype)) {
      throw InvalidArgument("entity \"" + e.id + "\" has undeclared type \"" + e.etype + "\"");
    }
    skb.by_id_.emplace(e.id, EntityId{i});
    skb.name_index_[to_lower_ascii(e.name)].push_back(EntityId{i});
  }
  skb.entities_ = std::move(entities);

  skb.out_.resize(skb.entities_.size());
  skb.in_.resize(skb.entities_.size());
  for (const auto& e : edges) {
    auto src = skb.find(e.src);
    if (!src) throw LookupError("dangling edge endpoint \"" + e.src + "\"");
    auto dst = skb.find(e.dst);
    if (!dst) throw LookupError("dangling edge endpoint \"" + e.dst + "\"");
    auto rel = skb.find_relation(e.rel);
    if (!rel) throw LookupError("undeclared relation \"" + e.rel + "\"");
    skb.out_[src->value].push_back({*rel, *dst});
    skb.in_[dst->value].push_back({*rel, *src});
  }
  for (auto& adj : skb.out_) std::sort(adj.begin(), adj.end());
  for (auto& adj : skb.in_) std::sort(adj.begin(), adj.end());

  std::sort(edges.begin(), edges.end());
  skb.edges_ = std::move(edges);
  return skb;
}

bool Skb::has_entity_type(std::string_view etype) const {
  return std::binary_search(entity_types_.begin(), entity_types_.end(), etype,
                            std::less<>{});
}

std::optional<EntityId> Skb::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

EntityId Skb::require(std::string_view id) const {
  auto e = find(id);
  if (!e) throw LookupError("unknown entity id \"" + std::string(id) + "\"");
  return *e;
}

std::optional<RelationId> Skb::find_relation(std::string_view label) const {
  auto it = std::lower_bound(relation_types_.begin(), relation_types_.end(), label,
                             std::less<>{});
  if (it == relation_types_.end() || *it != label) return std::nullopt;
  return RelationId{static_cast<std::uint32_t>(it - relation_types_.begin())};
}

RelationId Skb::require_relation(std::string_view label) const {
  auto r = find_relation(label);
  if (!r) throw LookupError("unknown relation \"" + std::string(label) + "\"");
  return *r;
}

EntitySet Skb::neighbors(EntityId e, RelationId rel, Direction dir) const {
  EntitySet out;
  auto collect = [&](std::span<const HalfEdge> adj) {
    auto lo = std::lower_bound(adj.begin(), adj.end(), HalfEdge{rel, EntityId{0}});
    for (auto it = lo; it != adj.end() && it->rel == rel; ++it) out.push_back(it->other);
  };
  if (dir != Direction::backward) collect(out_edges(e));
  if (dir != Direction::forward) collect(in_edges(e));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

EntitySet Skb::neighbors(std::string_view id, std::string_view rel, Direction dir) const {
  return neighbors(require(id), require_relation(rel), dir);
}

EntitySet Skb::ego_graph(EntityId seed, std::span<const RelationId> rels, int radius,
                         int radius_cap) const {
  if (seed.value >= entities_.size()) throw LookupError("unknown seed entity");
  if (rels.empty()) throw InvalidArgument("ego_graph: empty relation set");
  if (radius < 1 || radius > radius_cap) {
    throw InvalidArgument("ego_graph: radius " + std::to_string(radius) + " outside [1, " +
                          std::to_string(radius_cap) + "]");
  }
  std::vector<char> allowed(relation_types_.size(), 0);
  for (auto r : rels) allowed.at(r.value) = 1;

  std::vector<char> seen(entities_.size(), 0);
  seen[seed.value] = 1;
  EntitySet frontier{seed};
  EntitySet reached;
  for (int hop = 0; hop < radius && !frontier.empty(); ++hop) {
    EntitySet next;
    for (auto u : frontier) {
      for (const auto* adj : {&out_[u.value], &in_[u.value]}) {
        for (const auto& h : *adj) {
          if (!allowed[h.rel.value] || seen[h.other.value]) continue;
          seen[h.other.value] = 1;
          next.push_back(h.other);
        }
      }
    }
    reached.insert(reached.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  std::sort(reached.begin(), reached.end());
  return reached;
}

std::vector<std::string> Skb::ego_graph(std::string_view seed,
                                        const std::vector<std::string>& rels, int radius,
                                        int radius_cap) const {
  RelationSet ids;
  for (const auto& r : rels) ids.push_back(require_relation(r));
  std::vector<std::string> out;
  for (auto e : ego_graph(require(seed), ids, radius, radius_cap)) out.push_back(entity(e).id);
  return out;
}

PathSet Skb::reasoning_paths(EntityId seed, EntityId target, std::span<const RelationId> rels,
                             int radius, std::size_t max_paths) const {
  if (seed.value >= entities_.size() || target.value >= entities_.size()) {
    throw LookupError("reasoning_paths: unknown entity");
  }
  std::vector<char> allowed(relation_types_.size(), 0);
  for (auto r : rels) allowed.at(r.value) = 1;

  std::vector<ReasoningPath> found;
  ReasoningPath cur;
  cur.nodes.push_back(seed);
  std::vector<char> on_path(entities_.size(), 0);
  on_path[seed.value] = 1;

  std::function<void(EntityId)> dfs = [&](EntityId u) {
    if (static_cast<int>(cur.hops()) >= radius) return;
    auto step = [&](const HalfEdge& h, Direction d) {
      if (!allowed[h.rel.value] || on_path[h.other.value]) return;
      cur.nodes.push_back(h.other);
      cur.rels.push_back(h.rel);
      cur.dirs.push_back(d);
      if (h.other == target) {
        found.push_back(cur);
      } else {
        on_path[h.other.value] = 1;
        dfs(h.other);
        on_path[h.other.value] = 0;
      }
      cur.nodes.pop_back();
      cur.rels.pop_back();
      cur.dirs.pop_back();
    };
    for (const auto& h : out_[u.value]) step(h, Direction::forward);
    for (const auto& h : in_[u.value]) step(h, Direction::backward);
  };
  if (seed != target) dfs(seed);

  std::sort(found.begin(), found.end(), [](const ReasoningPath& a, const ReasoningPath& b) {
    if (a.hops() != b.hops()) return a.hops() < b.hops();
    return a < b;
  });
  found.erase(std::unique(found.begin(), found.end()), found.end());
  PathSet out;
  if (found.size() > max_paths) {
    found.resize(max_paths);
    out.truncated = true;
  }
  out.paths = std::move(found);
  return out;
}

bool Skb::path_is_valid(const ReasoningPath& p) const {
  if (p.rels.empty() || p.nodes.size() != p.rels.size() + 1 || p.dirs.size() != p.rels.size()) {
    return false;
  }
  for (auto n : p.nodes) {
    if (n.value >= entities_.size()) return false;
  }
  for (std::size_t i = 0; i < p.rels.size(); ++i) {
    auto from = p.nodes[i];
    auto to = p.nodes[i + 1];
    const auto& adj = p.dirs[i] == Direction::forward ? out_[from.value] : in_[from.value];
    if (p.dirs[i] == Direction::both) return false;
    if (!std::binary_search(adj.begin(), adj.end(), HalfEdge{p.rels[i], to})) return false;
  }
  return true;
}

std::string Skb::verbalize(const ReasoningPath& p) const {
  std::string out = entity(p.nodes.at(0)).name;
  for (std::size_t i = 0; i < p.rels.size(); ++i) {
    out += " -> ";
    out += relation_label(p.rels[i]);
    out += " -> ";
    out += entity(p.nodes.at(i + 1)).name;
  }
  return out;
}

std::vector<EntityId> Skb::resolve_by_name(std::string_view name) const {
  auto it = name_index_.find(to_lower_ascii(name));
  if (it == name_index_.end()) return {};
  auto ids = it->second;
  std::sort(ids.begin(), ids.end(), [this](EntityId a, EntityId b) {
    auto da = degree(a);
    auto db = degree(b);
    if (da != db) return da > db;
    return a < b;
  });
  return ids;
}

bool operator==(const Skb& a, const Skb& b) {
  return a.entities_ == b.entities_ && a.edges_ == b.edges_ &&
         a.entity_types_ == b.entity_types_ && a.relation_types_ == b.relation_types_;
}

EntitySet intersect_candidates(std::span<const EntitySet> sets) {
  if (sets.empty()) throw InvalidArgument("intersect_candidates: empty list");
  EntitySet acc = sets.front();
  for (std::size_t i = 1; i < sets.size() && !acc.empty(); ++i) {
    EntitySet next;
    std::set_intersection(acc.begin(), acc.end(), sets[i].begin(), sets[i].end(),
                          std::back_inserter(next));
    acc = std::move(next);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// JSONL I/O

namespace {

struct Schema {
  std::vector<std::string> entity_types;
  std::vector<std::string> relation_types;
};

std::vector<std::string> string_array(const json& j, const char* key, const std::string& src,
                                      std::size_t line) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw ParseError(src, line, std::string("schema record missing array \"") + key + "\"");
  }
  std::vector<std::string> out;
  for (const auto& v : j[key]) {
    if (!v.is_string()) throw ParseError(src, line, std::string("non-string in ") + key);
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string string_field(const json& j, const char* key, const std::string& src,
                         std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw ParseError(src, line, std::string("missing string field \"") + key + "\"");
  }
  return it->get<std::string>();
}

// Calls fn(record, line_no) for every non-blank line; returns a schema record
// if the first record is one.
template <typename Fn>
std::optional<Schema> read_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open " + path.string());
  const std::string src = path.string();
  std::optional<Schema> schema;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(src, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(src, line_no, "record is not an object");
    if (j.contains("schema")) {
      if (!first) throw ParseError(src, line_no, "schema record must be the first line");
      const auto& s = j["schema"];
      schema = Schema{string_array(s, "entity_types", src, line_no),
                      string_array(s, "relation_types", src, line_no)};
    } else {
      fn(j, line_no, src);
    }
    first = false;
  }
  return schema;
}

}  // namespace

Skb load_skb(const std::filesystem::path& entities_path, const std::filesystem::path& edges_path) {
  std::vector<Entity> entities;
  std::unordered_map<std::string, std::size_t> seen;
  auto schema_a = read_jsonl(entities_path, [&](const json& j, std::size_t line,
                                                const std::string& src) {
    Entity e;
    e.id = string_field(j, "id", src, line);
    e.etype = string_field(j, "type", src, line);
    e.name = string_field(j, "name", src, line);
    if (auto it = j.find("doc"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) throw ParseError(src, line, "\"doc\" must be a string or null");
      e.doc = it->get<std::string>();
    }
    if (auto [pos, inserted] = seen.emplace(e.id, line); !inserted) {
      throw ParseError(src, line, "duplicate entity id \"" + e.id + "\" (first seen on line " +
                                      std::to_string(pos->second) + ")");
    }
    entities.push_back(std::move(e));
  });

  std::vector<EdgeRecord> edges;
  auto schema_b = read_jsonl(edges_path, [&](const json& j, std::size_t line,
                                             const std::string& src) {
    EdgeRecord e{string_field(j, "src", src, line), string_field(j, "rel", src, line),
                 string_field(j, "dst", src, line)};
    for (const auto* end : {&e.src, &e.dst}) {
      if (!seen.contains(*end)) {
        throw ParseError(src, line, "dangling edge endpoint \"" + *end + "\"");
      }
    }
    edges.push_back(std::move(e));
  });

  if (schema_a && schema_b) {
    throw ParseError(edges_path.string(), 1, "schema record given in both files");
  }
  auto schema = schema_a ? schema_a : schema_b;
  if (!schema) return Skb::build(std::move(entities), std::move(edges));

  std::set<std::string> etypes(schema->entity_types.begin(), schema->entity_types.end());
  std::set<std::string> rtypes(schema->relation_types.begin(), schema->relation_types.end());
  for (const auto& e : entities) {
    if (!etypes.contains(e.etype)) {
      throw ParseError(entities_path.string(), seen.at(e.id),
                       "entity type \"" + e.etype + "\" not in schema");
    }
  }
  for (const auto& e : edges) {
    if (!rtypes.contains(e.rel)) {
      throw InvalidArgument("relation \"" + e.rel + "\" not in schema");
    }
  }
  return Skb::build(std::move(entities), std::move(edges), std::move(schema->entity_types),
                    std::move(schema->relation_types));
}

void write_skb(const Skb& skb, const std::filesystem::path& entities_path,
               const std::filesystem::path& edges_path) {
  std::ofstream ents(entities_path, std::ios::binary);
  if (!ents) throw LookupError("cannot write " + entities_path.string());
  json schema = {{"schema",
                  {{"entity_types", skb.entity_types()},
                   {"relation_types", skb.relation_types()}}}};
  ents << schema.dump() << '\n';
  for (const auto& e : skb.entities()) {
    json j = {{"id", e.id}, {"type", e.etype}, {"name", e.name}};
    j["doc"] = e.doc ? json(*e.doc) : json(nullptr);
    ents << j.dump() << '\n';
  }
  std::ofstream eds(edges_path, std::ios::binary);
  if (!eds) throw LookupError("cannot write " + edges_path.string());
  for (const auto& e : skb.edges()) {
    eds << json{{"src", e.src}, {"rel", e.rel}, {"dst", e.dst}}.dump() << '\n';
  }
}

}  // namespace skbqa
