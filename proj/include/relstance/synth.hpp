#pragma once

#include <cstdint>
#include <vector>

#include "relstance/ingest.hpp"
#include "relstance/relgraph.hpp"

namespace relstance {

/// Two communities with a complete directed edge set: supporter within, opponent across.
RelationGraph two_community_graph(std::size_t per_community = 30);

struct EdgeHoldout {
  RelationGraph train;  // every node, the remaining edges
  std::vector<Edge> heldout;
};

/// Moves round(fraction·|E|) uniformly chosen edges out of the graph.
EdgeHoldout holdout_edges(const RelationGraph& graph, double fraction, std::uint64_t seed);

struct FusionSynthConfig {
  std::size_t records = 2000;
  std::size_t hubs = 120;
  std::size_t commenters_per_hub = 4;
  std::size_t topics = 5;
  std::size_t vocabulary = 500;
  std::size_t max_words = 150;
  std::uint64_t seed = 1;
};

/// Star-shaped interaction data. Each hub replies only to its own commenters and
/// always with the same stance (hub index mod 3), so the stance is fixed by the
/// hub's relation type while comment and reply texts are label-independent noise.
std::vector<InteractionRecord> fusion_dataset(const FusionSynthConfig& cfg);

}  // namespace relstance
