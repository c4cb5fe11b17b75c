#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relstance/autoenc.hpp"
#include "relstance/classifier.hpp"
#include "relstance/ingest.hpp"
#include "relstance/metrics.hpp"
#include "relstance/relgraph.hpp"
#include "relstance/textfeat.hpp"

namespace relstance {

enum class ProtocolMode : std::uint8_t { in_domain, cross_domain };
enum class SplitMode : std::uint8_t { global, per_topic };

std::string_view to_string(ProtocolMode m) noexcept;
std::optional<ProtocolMode> parse_protocol_mode(std::string_view s) noexcept;
std::string_view to_string(SplitMode m) noexcept;
std::optional<SplitMode> parse_split_mode(std::string_view s) noexcept;

struct PipelineConfig {
  SplitRatios split = kDefaultSplit;
  SplitMode split_mode = SplitMode::global;
  Tau tau = Tau::per_edge();
  double rho = 0.3;
  std::uint64_t seed = 1;
  GaeTrainConfig gae;
  /// false: the encoder starts from random init and is fine-tuned with the classifier.
  bool pretrain = true;
  ClassifierTrainConfig classifier;
  /// Tail of the training pool used as dev in cross-domain runs.
  double cross_dev_fraction = 0.1;

  void validate() const;
};

/// Gae/classifier configs with the pipeline seed applied; pretraining off forces fine-tuning.
GaeTrainConfig effective_gae_config(const PipelineConfig& cfg);
ClassifierTrainConfig effective_classifier_config(const PipelineConfig& cfg);

struct RunReport {
  std::string key;  // "all" in-domain, the held-out topic cross-domain
  std::uint64_t seed = 0;
  MetricsReport overall;
  std::vector<MetricsReport> per_topic;
  std::vector<MetricsReport> by_length;
  /// Topics present in the training records, for the leakage audit.
  std::vector<std::string> train_topics;
  std::size_t train_size = 0;
  std::size_t dev_size = 0;
  std::size_t test_size = 0;
  std::size_t candidate_edges = 0;  // typed edges before retyping
  std::size_t retyped_edges = 0;
  double retyped_fraction = 0.0;
  double gae_final_loss = 0.0;
  std::size_t best_epoch = 0;
  double best_dev_macro_f1 = 0.0;

  bool operator==(const RunReport&) const = default;
};

struct PipelineRun {
  RunReport report;
  RelationGraph graph;
  GaeParams gae;
  ClassifierParams classifier;
  std::vector<Prediction> predictions;
};

/// Edges that existed before interaction injection: current edges minus injected ones.
std::size_t candidate_edge_count(const RelationGraph& graph);

/// Test-set metrics for trained parameters: overall, per topic, per length bucket.
RunReport evaluate_split(const DatasetSplit& split, const RelationGraph& graph, const GaeParams& gae,
                         const ClassifierParams& classifier, const TextFeatureSource& text,
                         std::vector<Prediction>* predictions = nullptr);

/// graph build → injection → GAE pretraining → classifier training → test evaluation.
PipelineRun run_pipeline(const DatasetSplit& split, const TextFeatureSource& text, const PipelineConfig& cfg);

DatasetSplit split_for(const std::vector<InteractionRecord>& records, const PipelineConfig& cfg);
/// Records of every other topic form the pool (temporally split into train/dev); `topic` is the test set.
DatasetSplit cross_domain_split(const std::vector<InteractionRecord>& records, const std::string& topic,
                                double dev_fraction);

struct SummaryRow {
  std::string key;
  std::size_t runs = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double macro_f1_mean = 0.0;
  double macro_f1_std = 0.0;

  bool operator==(const SummaryRow&) const = default;
};

struct ProtocolReport {
  ProtocolMode mode = ProtocolMode::in_domain;
  std::vector<RunReport> runs;
  /// Cross-domain only: unweighted mean over held-out topics, one per seed.
  std::vector<MetricsReport> averages;
  /// Mean ± sample std over seeds for every report key.
  std::vector<SummaryRow> summary;

  bool operator==(const ProtocolReport&) const = default;
};

/// Throws if a cross-domain run is requested on fewer than two topics.
ProtocolReport run_protocol(const std::vector<InteractionRecord>& records, ProtocolMode mode,
                            const TextFeatureSource& text, const PipelineConfig& cfg,
                            const std::vector<std::uint64_t>& seeds);

}  // namespace relstance
