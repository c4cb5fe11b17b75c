#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "relstance/autoenc.hpp"
#include "relstance/classifier.hpp"
#include "relstance/metrics.hpp"
#include "relstance/protocol.hpp"
#include "relstance/relgraph.hpp"

namespace relstance {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

Json read_json_file(const std::filesystem::path& path);
/// indent < 0 writes compact JSON.
void write_json_file(const std::filesystem::path& path, const Json& doc, int indent = 1);

// {nodes, edges: [[src, rel, dst]], aggregate_weights: [[src, dst, w]], meta: {tau, rho, seed, retyped}}
Json graph_to_json(const RelationGraph& graph);
RelationGraph graph_from_json(const Json& doc);

struct GaeCheckpoint {
  GaeParams params;
  std::vector<std::string> nodes;  // node_index_map: row i of node_embeddings belongs to nodes[i]
  std::uint64_t rng_seed = 0;

  bool operator==(const GaeCheckpoint&) const = default;
};

Json gae_to_json(const GaeCheckpoint& ckpt);
/// Throws ParseError on a wrong section tag, version or array shape.
GaeCheckpoint gae_from_json(const Json& doc);

struct ClassifierCheckpoint {
  ClassifierParams params;
  GaeCheckpoint gae;

  bool operator==(const ClassifierCheckpoint&) const = default;
};

Json classifier_to_json(const ClassifierCheckpoint& ckpt);
ClassifierCheckpoint classifier_from_json(const Json& doc);

/// Throws std::invalid_argument unless the checkpoint rows follow the graph's node order.
void check_node_map(const std::vector<std::string>& checkpoint_nodes, const RelationGraph& graph);

Json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const Json& doc);
Json run_report_to_json(const RunReport& r);
RunReport run_report_from_json(const Json& doc);
Json protocol_report_to_json(const ProtocolReport& r);
ProtocolReport protocol_report_from_json(const Json& doc);

/// One {id, gold, pred, probs: [3]} object per line.
void write_predictions(std::ostream& out, std::span<const Prediction> preds);
std::vector<Prediction> read_predictions(std::istream& in);

/// Columns: mode, topic, seed, acc, macro_f1, then P/R/F1 for agree, disagree, neutral.
void write_aggregate_csv(std::ostream& out, const ProtocolReport& report);

}  // namespace relstance
