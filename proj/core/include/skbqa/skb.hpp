#pragma once
// Semi-structured knowledge base: typed entities carrying optional documents,
// typed directed edges, and the graph queries the retrievers are built on.
//
// Entities are stored sorted by their string id, so the dense EntityId handle
// order is the same as lexicographic id order. Every EntitySet returned here
// is a sorted, duplicate-free vector of handles.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace skbqa {

struct EntityId {
  std::uint32_t value = 0;
  friend auto operator<=>(EntityId, EntityId) = default;
};

struct RelationId {
  std::uint32_t value = 0;
  friend auto operator<=>(RelationId, RelationId) = default;
};

using EntitySet = std::vector<EntityId>;
using RelationSet = std::vector<RelationId>;

enum class Direction : std::uint8_t { forward, backward, both };

struct Entity {
  std::string id;
  std::string etype;
  std::string name;
  std::optional<std::string> doc;

  friend bool operator==(const Entity&, const Entity&) = default;
};

// One edge as it appears on disk.
struct EdgeRecord {
  std::string src;
  std::string rel;
  std::string dst;

  friend auto operator<=>(const EdgeRecord&, const EdgeRecord&) = default;
};

// Adjacency entry seen from one endpoint.
struct HalfEdge {
  RelationId rel;
  EntityId other;
  friend auto operator<=>(const HalfEdge&, const HalfEdge&) = default;
};

// h hops: nodes.size() == h + 1, rels.size() == dirs.size() == h.
// dirs[i] is forward when the edge points from nodes[i] to nodes[i + 1].
struct ReasoningPath {
  std::vector<EntityId> nodes;
  std::vector<RelationId> rels;
  std::vector<Direction> dirs;

  std::size_t hops() const { return rels.size(); }
  friend auto operator<=>(const ReasoningPath&, const ReasoningPath&) = default;
};

struct PathSet {
  std::vector<ReasoningPath> paths;
  bool truncated = false;
};

inline constexpr int kDefaultRadiusCap = 2;
inline constexpr std::size_t kDefaultPathCap = 16;

class Skb {
 public:
  // Builds and validates a knowledge base. When entity_types / relation_types
  // are empty they are inferred from the labels in use.
  static Skb build(std::vector<Entity> entities, std::vector<EdgeRecord> edges,
                   std::vector<std::string> entity_types = {},
                   std::vector<std::string> relation_types = {});

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const Entity& entity(EntityId e) const { return entities_.at(e.value); }
  std::span<const Entity> entities() const { return entities_; }
  // Edges sorted by (src, rel, dst) string order.
  std::span<const EdgeRecord> edges() const { return edges_; }

  const std::vector<std::string>& entity_types() const { return entity_types_; }
  const std::vector<std::string>& relation_types() const { return relation_types_; }
  bool has_entity_type(std::string_view etype) const;

  std::optional<EntityId> find(std::string_view id) const;
  EntityId require(std::string_view id) const;  // throws LookupError
  std::optional<RelationId> find_relation(std::string_view label) const;
  RelationId require_relation(std::string_view label) const;
  const std::string& relation_label(RelationId r) const { return relation_types_.at(r.value); }

  // Sorted by (rel, other).
  std::span<const HalfEdge> out_edges(EntityId e) const { return out_.at(e.value); }
  std::span<const HalfEdge> in_edges(EntityId e) const { return in_.at(e.value); }
  std::size_t degree(EntityId e) const { return out_.at(e.value).size() + in_.at(e.value).size(); }

  EntitySet neighbors(EntityId e, RelationId rel, Direction dir) const;
  EntitySet neighbors(std::string_view id, std::string_view rel, Direction dir) const;

  // Entities within `radius` hops of `seed`, following edges whose relation
  // is in `rels` in either direction. The seed itself is excluded.
  // Throws InvalidArgument on empty rels or radius outside [1, radius_cap].
  EntitySet ego_graph(EntityId seed, std::span<const RelationId> rels, int radius,
                      int radius_cap = kDefaultRadiusCap) const;
  std::vector<std::string> ego_graph(std::string_view seed, const std::vector<std::string>& rels,
                                     int radius, int radius_cap = kDefaultRadiusCap) const;

  // All simple paths seed -> target of 1..radius hops over `rels`, ordered by
  // (length, node ids, relations, directions) and capped at max_paths.
  PathSet reasoning_paths(EntityId seed, EntityId target, std::span<const RelationId> rels,
                          int radius, std::size_t max_paths = kDefaultPathCap) const;

  // True when every hop of p is backed by an edge of this knowledge base.
  bool path_is_valid(const ReasoningPath& p) const;

  // "{name} -> {rel} -> ... -> {rel} -> {name}"
  std::string verbalize(const ReasoningPath& p) const;

  // Case-insensitive exact name match, ordered by descending degree then id.
  std::vector<EntityId> resolve_by_name(std::string_view name) const;

  // Structural equality: same entities, edge multiset and type sets.
  friend bool operator==(const Skb& a, const Skb& b);

 private:
  Skb() = default;

  std::vector<Entity> entities_;
  std::vector<EdgeRecord> edges_;
  std::vector<std::string> entity_types_;    // sorted
  std::vector<std::string> relation_types_;  // sorted; RelationId indexes this
  bool explicit_schema_ = false;
  std::unordered_map<std::string, EntityId> by_id_;
  std::vector<std::vector<HalfEdge>> out_;
  std::vector<std::vector<HalfEdge>> in_;
  std::unordered_map<std::string, std::vector<EntityId>> name_index_;

  friend void write_skb(const Skb&, const std::filesystem::path&, const std::filesystem::path&);
};

// Line-delimited loaders/writers. The optional schema record
// {"schema": {"entity_types": [...], "relation_types": [...]}} may appear as
// the first line of either file.
Skb load_skb(const std::filesystem::path& entities_path, const std::filesystem::path& edges_path);
void write_skb(const Skb& skb, const std::filesystem::path& entities_path,
               const std::filesystem::path& edges_path);

// Intersection of all input sets. Each input must be sorted and unique.
// Throws InvalidArgument on an empty list.
EntitySet intersect_candidates(std::span<const EntitySet> sets);

std::string to_lower_ascii(std::string_view s);

}  // namespace skbqa
