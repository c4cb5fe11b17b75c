#include "relstance/relgraph.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>
#include <unordered_set>

#include "relstance/random.hpp"

namespace relstance {

namespace {
constexpr std::uint64_t kInjectStream = 0x696e6a656374ULL;
}

std::string_view to_string(RelationType r) noexcept {
  switch (r) {
    case RelationType::supporter: return "supporter";
    case RelationType::opponent: return "opponent";
    case RelationType::acquaintance: return "acquaintance";
    case RelationType::interaction: return "interaction";
  }
  return "interaction";
}

std::optional<RelationType> parse_relation(std::string_view s) noexcept {
  for (auto r : kAllRelations) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

Tau Tau::seconds(std::int64_t s) {
  if (s <= 0) throw std::invalid_argument("tau must be positive");
  Tau t;
  t.seconds_ = s;
  return t;
}

Tau Tau::parse(std::string_view s) {
  if (s == "per-edge" || s == "per_edge") return per_edge();
  std::int64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || s.empty())
    throw std::invalid_argument("tau must be 'per-edge' or a number of seconds, got '" + std::string(s) + "'");
  return seconds(v);
}

std::string Tau::to_string() const { return seconds_ ? std::to_string(*seconds_) : "per-edge"; }

NodeIndex RelationGraph::add_node(std::string_view author) {
  if (auto it = index_.find(std::string(author)); it != index_.end()) return it->second;
  const auto idx = static_cast<NodeIndex>(nodes_.size());
  nodes_.emplace_back(author);
  index_.emplace(nodes_.back(), idx);
  incident_.emplace_back();
  return idx;
}

std::optional<NodeIndex> RelationGraph::find_node(std::string_view author) const {
  if (auto it = index_.find(std::string(author)); it != index_.end()) return it->second;
  return std::nullopt;
}

NodeIndex RelationGraph::node(std::string_view author) const {
  auto n = find_node(author);
  if (!n) throw std::out_of_range("unknown author '" + std::string(author) + "'");
  return *n;
}

std::size_t RelationGraph::add_edge(Edge e) {
  if (e.src >= nodes_.size() || e.dst >= nodes_.size()) throw std::out_of_range("edge endpoint is not a node");
  if (e.src == e.dst) throw std::invalid_argument("self-loop edges are not allowed");
  const auto key = pair_key(e.src, e.dst);
  if (pair_index_.contains(key))
    throw std::invalid_argument("duplicate edge " + nodes_[e.src] + " -> " + nodes_[e.dst]);
  const std::size_t idx = edges_.size();
  edges_.push_back(e);
  pair_index_.emplace(key, idx);
  incident_[e.src].push_back(idx);
  incident_[e.dst].push_back(idx);
  return idx;
}

std::optional<std::size_t> RelationGraph::edge_between(NodeIndex src, NodeIndex dst) const {
  if (auto it = pair_index_.find(pair_key(src, dst)); it != pair_index_.end()) return it->second;
  return std::nullopt;
}

bool RelationGraph::contains(const Edge& e) const {
  auto idx = edge_between(e.src, e.dst);
  return idx && edges_[*idx].relation == e.relation;
}

void RelationGraph::retype_edge(std::size_t edge_index, RelationType r) { edges_.at(edge_index).relation = r; }

std::span<const std::size_t> RelationGraph::incident_edges(NodeIndex n) const { return incident_.at(n); }

std::size_t RelationGraph::relation_count(RelationType r) const {
  return static_cast<std::size_t>(
      std::count_if(edges_.begin(), edges_.end(), [r](const Edge& e) { return e.relation == r; }));
}

int window_opinion(int agree, int disagree, int neutral) noexcept {
  const int top = std::max({agree, disagree, neutral});
  if (top == 0) return 0;
  const bool a = agree == top;
  const bool d = disagree == top;
  if (a && d) return 0;
  if (a) return 1;
  if (d) return -1;
  return 0;
}

std::vector<Snapshot> build_snapshots(const std::vector<InteractionRecord>& records, Tau tau) {
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].timestamp < records[i - 1].timestamp)
      throw std::invalid_argument("build_snapshots: records are not temporally ordered");
  }
  std::vector<Snapshot> out;
  if (records.empty()) return out;

  if (tau.is_per_edge()) {
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      Snapshot s;
      s.window_index = static_cast<std::int64_t>(i);
      s.authors = {r.comment_author, r.reply_author};
      if (!r.is_self_reply()) s.entries.emplace(AuthorPair{r.reply_author, r.comment_author}, stance_sign(r.label));
      out.push_back(std::move(s));
    }
    return out;
  }

  const std::int64_t width = tau.window_seconds();
  const std::int64_t origin = records.front().timestamp;
  std::size_t i = 0;
  while (i < records.size()) {
    const std::int64_t k = (records[i].timestamp - origin) / width;
    Snapshot s;
    s.window_index = k;
    std::map<AuthorPair, std::array<int, 3>> counts;
    for (; i < records.size() && (records[i].timestamp - origin) / width == k; ++i) {
      const auto& r = records[i];
      s.authors.push_back(r.comment_author);
      s.authors.push_back(r.reply_author);
      if (r.is_self_reply()) continue;
      counts[AuthorPair{r.reply_author, r.comment_author}][class_index(r.label)] += 1;
    }
    for (const auto& [pair, c] : counts) {
      s.entries.emplace(pair, window_opinion(c[class_index(Stance::agree)], c[class_index(Stance::disagree)],
                                             c[class_index(Stance::neutral)]));
    }
    out.push_back(std::move(s));
  }
  return out;
}

RelationGraph aggregate_relations(const std::vector<Snapshot>& snapshots) {
  RelationGraph g;
  std::map<std::pair<NodeIndex, NodeIndex>, int> sum;
  std::map<std::pair<NodeIndex, NodeIndex>, bool> signed_seen;
  for (const auto& s : snapshots) {
    for (const auto& a : s.authors) g.add_node(a);
    for (const auto& [pair, value] : s.entries) {
      const auto key = std::pair{g.add_node(pair.src), g.add_node(pair.dst)};
      sum[key] += value;
      signed_seen[key] = signed_seen[key] || value != 0;
    }
  }
  for (const auto& [key, total] : sum) {
    g.set_aggregate_weight(key.first, key.second, total);
    RelationType r;
    if (total > 0) {
      r = RelationType::supporter;
    } else if (total < 0) {
      r = RelationType::opponent;
    } else if (signed_seen[key]) {
      r = RelationType::acquaintance;
    } else {
      continue;
    }
    g.add_edge({key.first, r, key.second});
  }
  return g;
}

RelationGraph inject_interaction_edges(RelationGraph graph, const std::vector<AuthorPair>& heldout_pairs,
                                       double rho, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [0, 1]");
  Rng rng(seed, {kInjectStream});
  const std::size_t trained = graph.edge_count();
  for (std::size_t i = 0; i < trained; ++i) {
    const auto original = graph.edges()[i].relation;
    // One draw per edge keeps the stream aligned regardless of edge types.
    const bool retype = rng.bernoulli(rho);
    if (retype && original != RelationType::interaction) {
      graph.mark_retyped(i, original);
      graph.retype_edge(i, RelationType::interaction);
    }
  }
  for (const auto& p : heldout_pairs) {
    const NodeIndex s = graph.add_node(p.src);
    const NodeIndex d = graph.add_node(p.dst);
    if (s == d || graph.has_edge(s, d)) continue;
    graph.add_edge({s, RelationType::interaction, d});
  }
  graph.meta.rho = rho;
  graph.meta.seed = seed;
  return graph;
}

std::vector<AuthorPair> interaction_pairs(const std::vector<InteractionRecord>& records) {
  std::vector<AuthorPair> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.reply_author, r.comment_author});
  return out;
}

RelationGraph build_training_graph(const DatasetSplit& split, Tau tau, double rho, std::uint64_t seed) {
  auto graph = aggregate_relations(build_snapshots(split.train, tau));
  auto heldout = interaction_pairs(split.dev);
  auto test_pairs = interaction_pairs(split.test);
  heldout.insert(heldout.end(), test_pairs.begin(), test_pairs.end());
  graph = inject_interaction_edges(std::move(graph), heldout, rho, seed);
  for (const auto* part : {&split.train, &split.dev, &split.test}) {
    for (const auto& r : *part) {
      graph.add_node(r.comment_author);
      graph.add_node(r.reply_author);
    }
  }
  graph.meta.tau = tau;
  return graph;
}

Subgraph extract_subgraph(const RelationGraph& graph, NodeIndex a, NodeIndex b, int radius) {
  if (a >= graph.node_count() || b >= graph.node_count())
    throw std::out_of_range("extract_subgraph: unknown author index");
  if (radius < 0) throw std::invalid_argument("extract_subgraph: negative radius");

  std::vector<int> depth(graph.node_count(), -1);
  std::vector<NodeIndex> frontier;
  for (NodeIndex n : {a, b}) {
    if (depth[n] < 0) {
      depth[n] = 0;
      frontier.push_back(n);
    }
  }
  for (int level = 0; level < radius && !frontier.empty(); ++level) {
    std::vector<NodeIndex> next;
    for (NodeIndex n : frontier) {
      for (std::size_t ei : graph.incident_edges(n)) {
        const auto& e = graph.edges()[ei];
        const NodeIndex other = e.src == n ? e.dst : e.src;
        if (depth[other] < 0) {
          depth[other] = level + 1;
          next.push_back(other);
        }
      }
    }
    frontier = std::move(next);
  }

  Subgraph sub;
  std::vector<NodeIndex> local(graph.node_count(), 0);
  for (NodeIndex n = 0; n < graph.node_count(); ++n) {
    if (depth[n] < 0) continue;
    local[n] = sub.graph.add_node(graph.nodes()[n]);
    sub.to_parent.push_back(n);
  }
  std::vector<std::size_t> induced;
  for (NodeIndex n : sub.to_parent) {
    for (std::size_t ei : graph.incident_edges(n)) {
      const auto& e = graph.edges()[ei];
      if (e.src == n && depth[e.dst] >= 0) induced.push_back(ei);
    }
  }
  std::sort(induced.begin(), induced.end());
  for (std::size_t ei : induced) {
    const auto& e = graph.edges()[ei];
    sub.graph.add_edge({local[e.src], e.relation, local[e.dst]});
  }
  sub.graph.meta = graph.meta;
  return sub;
}

}  // namespace relstance
