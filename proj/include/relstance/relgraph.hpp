#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "relstance/ingest.hpp"

namespace relstance {

/// Edge relation. Ordinals are part of the checkpoint format and must not change.
enum class RelationType : std::uint8_t { supporter = 0, opponent = 1, acquaintance = 2, interaction = 3 };

inline constexpr std::size_t kRelationCount = 4;
inline constexpr std::array<RelationType, kRelationCount> kAllRelations{
    RelationType::supporter, RelationType::opponent, RelationType::acquaintance, RelationType::interaction};

std::string_view to_string(RelationType r) noexcept;
std::optional<RelationType> parse_relation(std::string_view s) noexcept;
inline std::size_t relation_index(RelationType r) noexcept { return static_cast<std::size_t>(r); }

using NodeIndex = std::uint32_t;

struct Edge {
  NodeIndex src = 0;
  RelationType relation = RelationType::interaction;
  NodeIndex dst = 0;

  bool operator==(const Edge&) const = default;
};

/// Snapshot window length. `per_edge()` gives one snapshot per interaction.
class Tau {
 public:
  static Tau per_edge() noexcept { return Tau{}; }
  static Tau seconds(std::int64_t s);
  /// "per-edge" or a positive integer number of seconds.
  static Tau parse(std::string_view s);

  bool is_per_edge() const noexcept { return !seconds_; }
  std::int64_t window_seconds() const { return seconds_.value(); }
  std::string to_string() const;

  bool operator==(const Tau&) const = default;

 private:
  std::optional<std::int64_t> seconds_;
};

struct AuthorPair {
  std::string src;
  std::string dst;

  auto operator<=>(const AuthorPair&) const = default;
};

/// Signed adjacency for one time window: (src, dst) → {-1, 0, +1}.
struct Snapshot {
  std::int64_t window_index = 0;
  std::map<AuthorPair, int> entries;
  /// Authors of every record that fell into the window, self-replies included.
  std::vector<std::string> authors;
};

/// Directed typed graph over authors with at most one edge per ordered pair.
class RelationGraph {
 public:
  NodeIndex add_node(std::string_view author);
  std::optional<NodeIndex> find_node(std::string_view author) const;
  NodeIndex node(std::string_view author) const;  // throws if unknown

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  /// Throws on a duplicate ordered pair, a self-loop, or an unknown endpoint.
  std::size_t add_edge(Edge e);
  std::optional<std::size_t> edge_between(NodeIndex src, NodeIndex dst) const;
  bool has_edge(NodeIndex src, NodeIndex dst) const { return edge_between(src, dst).has_value(); }
  bool contains(const Edge& e) const;
  void retype_edge(std::size_t edge_index, RelationType r);

  /// Indices of edges touching a node, either direction, ascending.
  std::span<const std::size_t> incident_edges(NodeIndex n) const;

  /// Summed snapshot weights A* for every pair with at least one snapshot entry.
  const std::map<std::pair<NodeIndex, NodeIndex>, int>& aggregate_weights() const noexcept { return weights_; }
  void set_aggregate_weight(NodeIndex src, NodeIndex dst, int w) { weights_[{src, dst}] = w; }

  /// Original relation of edges retyped to interaction, keyed by edge index.
  const std::map<std::size_t, RelationType>& retyped() const noexcept { return retyped_; }
  void mark_retyped(std::size_t edge_index, RelationType original) { retyped_[edge_index] = original; }

  std::size_t relation_count(RelationType r) const;

  struct Meta {
    Tau tau = Tau::per_edge();
    double rho = 0.0;
    std::uint64_t seed = 0;
  };
  Meta meta;

 private:
  static std::uint64_t pair_key(NodeIndex s, NodeIndex d) noexcept { return (std::uint64_t{s} << 32) | d; }

  std::vector<std::string> nodes_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<Edge> edges_;
  std::unordered_map<std::uint64_t, std::size_t> pair_index_;
  std::vector<std::vector<std::size_t>> incident_;
  std::map<std::pair<NodeIndex, NodeIndex>, int> weights_;
  std::map<std::size_t, RelationType> retyped_;
};

/// Edges run reply_author → comment_author. Self-replies produce no entry.
/// Throws std::invalid_argument if records are not temporally ordered.
std::vector<Snapshot> build_snapshots(const std::vector<InteractionRecord>& records, Tau tau);

/// Majority opinion of a window cell. Agree/disagree ties give 0; a tie between
/// neutral and one signed opinion gives the signed opinion.
int window_opinion(int agree, int disagree, int neutral) noexcept;

/// A* = Σ a^k; supporter if A*>0, opponent if A*<0, acquaintance if A*=0 with
/// some signed snapshot, otherwise no edge.
RelationGraph aggregate_relations(const std::vector<Snapshot>& snapshots);

/// Retypes each existing edge to interaction with probability rho, then adds an
/// interaction edge for every held-out pair that is not already an edge.
/// Unknown held-out authors are registered as nodes; self-pairs are skipped.
RelationGraph inject_interaction_edges(RelationGraph graph, const std::vector<AuthorPair>& heldout_pairs,
                                       double rho, std::uint64_t seed);

/// Reply→comment author pairs of the given records.
std::vector<AuthorPair> interaction_pairs(const std::vector<InteractionRecord>& records);

/// Training graph for a split: snapshots and relations from train records only,
/// dev/test pairs injected as interaction edges, every author of the split registered.
RelationGraph build_training_graph(const DatasetSplit& split, Tau tau, double rho, std::uint64_t seed);

struct Subgraph {
  RelationGraph graph;
  /// Subgraph node index → parent node index.
  std::vector<NodeIndex> to_parent;
};

/// Induced subgraph on {a, b} plus every node within `radius` hops of either,
/// ignoring edge direction. Nodes are ordered by parent index.
Subgraph extract_subgraph(const RelationGraph& graph, NodeIndex a, NodeIndex b, int radius = 1);

}  // namespace relstance
