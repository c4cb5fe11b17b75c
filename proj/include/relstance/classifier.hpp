#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relstance/autoenc.hpp"
#include "relstance/ingest.hpp"
#include "relstance/linalg.hpp"
#include "relstance/relgraph.hpp"
#include "relstance/textfeat.hpp"

namespace relstance {

enum class FusionMode : std::uint8_t { concat, add };

std::string_view to_string(FusionMode m) noexcept;
std::optional<FusionMode> parse_fusion(std::string_view s) noexcept;

struct ClassifierShape {
  std::size_t text_dim = 64;
  std::size_t graph_dim = 64;    // encoder width d
  std::size_t rel_out_dim = 64;  // width of the projected relation feature
  FusionMode fusion = FusionMode::concat;
  bool use_relations = true;     // false: text-only baseline
};

/// Relation projection, reconstruction decoder and softmax head. Gradients use the same type.
struct ClassifierParams {
  FusionMode fusion = FusionMode::concat;
  bool use_relations = true;
  Matrix rel_proj;     // rel_out×d
  Vector rel_bias;     // rel_out
  Matrix recon;        // d×rel_out
  Vector recon_bias;   // d
  Matrix fusion_weight;  // 3×(text+rel_out) for concat, 3×text for add or text-only
  Vector fusion_bias;    // 3

  std::size_t text_dim() const noexcept;
  std::size_t rel_out_dim() const noexcept { return rel_proj.rows(); }
  std::size_t graph_dim() const noexcept { return rel_proj.cols(); }

  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
  /// Throws if the blocks disagree on dimensions, or add-fusion widths differ.
  void validate() const;

  bool operator==(const ClassifierParams&) const = default;
};

ClassifierParams zeros_like(const ClassifierParams& p);
/// Weights ~ U(±√(6/(fan_in+fan_out))), biases zero.
ClassifierParams init_classifier_params(const ClassifierShape& shape, std::uint64_t seed);

/// Radius-1 subgraph around a query pair, ready for the encoder.
struct QueryGraph {
  Subgraph sub;
  MessageGraph messages;
};

QueryGraph make_query_graph(const RelationGraph& graph, NodeIndex a, NodeIndex b);

/// Mean of the encoder outputs over every node of the query subgraph (a and b included).
Vector subgraph_mean(const GaeParams& gae, const QueryGraph& query, EncoderCache* cache = nullptr);

struct RelationFeature {
  Vector graph_mean;  // h_RG
  Vector projected;   // h_R = W_R h_RG + b_R
};

RelationFeature relation_feature(const RelationGraph& graph, const GaeParams& gae, NodeIndex a, NodeIndex b,
                                 const ClassifierParams& params);

/// softmax(W[text; h_R] + b) for concat, softmax(W(text + h_R) + b) for add,
/// softmax(W text + b) when relations are disabled (h_R ignored).
std::array<double, kStanceCount> predict(std::span<const double> text, std::span<const double> relation,
                                         const ClassifierParams& params);

struct LabeledExample {
  std::string id;
  std::string topic;
  Vector text;
  NodeIndex comment_author = 0;
  NodeIndex reply_author = 0;
  Stance gold = Stance::neutral;
  std::size_t token_count = 0;
};

/// Resolves authors and text vectors; throws listing every id without a text vector.
std::vector<LabeledExample> make_examples(const std::vector<InteractionRecord>& records, const RelationGraph& graph,
                                          const TextFeatureSource& text);

struct ClassifierLoss {
  double total = 0.0;
  double stance = 0.0;
  double recon = 0.0;
  ClassifierParams grad;
  std::optional<GaeParams> gae_grad;  // present when the encoder is fine-tuned
};

/// L = mean −log p(y) + λ · mean ‖D(h_R) − h_RG‖², with gradients.
ClassifierLoss training_loss(std::span<const LabeledExample> batch, const ClassifierParams& params,
                             const GaeParams& gae, const RelationGraph& graph, double lambda_recon,
                             bool finetune_encoder = false);

struct ClassifierTrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double lambda_recon = 1.0;
  bool finetune_encoder = false;
  std::size_t rel_out_dim = 64;
  FusionMode fusion = FusionMode::concat;
  bool use_relations = true;
  std::uint64_t seed = 1;

  void validate() const;
};

struct ClassifierTrainResult {
  ClassifierParams params;
  GaeParams gae;  // equals the input unless the encoder was fine-tuned
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_dev_macro_f1 = 0.0;
  std::vector<double> dev_macro_f1;
  std::vector<double> train_loss;
};

/// Adam over shuffled batches; keeps the parameters of the best dev macro-F1 epoch.
ClassifierTrainResult train_classifier(const std::vector<LabeledExample>& train,
                                       const std::vector<LabeledExample>& dev, const RelationGraph& graph,
                                       const GaeParams& gae, const ClassifierTrainConfig& cfg);
ClassifierTrainResult train_classifier(const DatasetSplit& split, const RelationGraph& graph, const GaeParams& gae,
                                       const TextFeatureSource& text, const ClassifierTrainConfig& cfg);

struct Prediction {
  std::string id;
  Stance gold = Stance::neutral;
  Stance pred = Stance::neutral;
  std::array<double, kStanceCount> probs{};
};

std::vector<Prediction> predict_examples(std::span<const LabeledExample> examples, const ClassifierParams& params,
                                         const GaeParams& gae, const RelationGraph& graph);

/// Central-difference check of training_loss over classifier parameters and,
/// when fine-tuning, the encoder parameters as well.
double classifier_finite_diff_check(std::span<const LabeledExample> batch, const ClassifierParams& params,
                                    const GaeParams& gae, const RelationGraph& graph, double lambda_recon,
                                    bool finetune_encoder, std::size_t probe_count, double eps,
                                    std::uint64_t seed = 11);

}  // namespace relstance
