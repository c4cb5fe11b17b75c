#include "relstance/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "relstance/random.hpp"

namespace relstance {

namespace {

constexpr std::uint64_t kHoldoutStream = 0x686f6c64ULL;
constexpr std::uint64_t kFusionStream = 0x66757365ULL;

std::string padded(std::string_view prefix, std::size_t i, std::size_t width) {
  std::string digits = std::to_string(i);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return std::string(prefix) + digits;
}

std::string noise_text(Rng& rng, const FusionSynthConfig& cfg) {
  const std::size_t words = 1 + rng.index(cfg.max_words);
  std::string out;
  for (std::size_t w = 0; w < words; ++w) {
    if (w) out += ' ';
    out += "w" + std::to_string(rng.index(cfg.vocabulary));
  }
  return out;
}

}  // namespace

RelationGraph two_community_graph(std::size_t per_community) {
  if (per_community == 0) throw std::invalid_argument("communities must be non-empty");
  const std::size_t n = 2 * per_community;
  RelationGraph g;
  for (std::size_t i = 0; i < n; ++i) g.add_node(padded("n", i, 3));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool same = (i < per_community) == (j < per_community);
      g.add_edge({static_cast<NodeIndex>(i), same ? RelationType::supporter : RelationType::opponent,
                  static_cast<NodeIndex>(j)});
    }
  }
  return g;
}

EdgeHoldout holdout_edges(const RelationGraph& graph, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("holdout fraction must lie in (0, 1)");
  const auto& edges = graph.edges();
  std::vector<std::size_t> idx(edges.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(edges.size())));
  Rng rng(seed, {kHoldoutStream});
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  std::vector<bool> held(edges.size(), false);
  for (std::size_t i = 0; i < k; ++i) held[idx[i]] = true;

  EdgeHoldout out;
  for (const auto& name : graph.nodes()) out.train.add_node(name);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (held[i]) {
      out.heldout.push_back(edges[i]);
    } else {
      out.train.add_edge(edges[i]);
    }
  }
  return out;
}

std::vector<InteractionRecord> fusion_dataset(const FusionSynthConfig& cfg) {
  if (cfg.hubs < kStanceCount || cfg.commenters_per_hub == 0 || cfg.topics == 0 || cfg.records == 0 ||
      cfg.vocabulary == 0 || cfg.max_words == 0)
    throw std::invalid_argument("fusion generator needs at least 3 hubs and positive sizes");
  Rng rng(cfg.seed, {kFusionStream});
  std::vector<InteractionRecord> out;
  out.reserve(cfg.records);
  for (std::size_t i = 0; i < cfg.records; ++i) {
    const std::size_t hub = rng.index(cfg.hubs);
    const std::size_t commenter = rng.index(cfg.commenters_per_hub);
    InteractionRecord r;
    r.id = padded("s", i, 5);
    r.reply_author = padded("hub", hub, 4);
    r.comment_author = padded("c", hub * cfg.commenters_per_hub + commenter, 5);
    r.label = kAllStances[hub % kStanceCount];
    r.timestamp = 1'600'000'000 + static_cast<std::int64_t>(i) * 60;
    r.topic = padded("topic", hub % cfg.topics, 1);
    r.comment_text = noise_text(rng, cfg);
    r.reply_text = noise_text(rng, cfg);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace relstance
