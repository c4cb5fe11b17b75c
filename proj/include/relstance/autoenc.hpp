#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "relstance/linalg.hpp"
#include "relstance/relgraph.hpp"

namespace relstance {

enum class DecoderKind : std::uint8_t { distmult, transe, hole };

std::string_view to_string(DecoderKind k) noexcept;
std::optional<DecoderKind> parse_decoder(std::string_view s) noexcept;

struct RgcnLayer {
  Matrix self;                                 // W_0, d×d
  std::array<Matrix, kRelationCount> relation;  // W_r, d×d

  bool operator==(const RgcnLayer&) const = default;
};

/// Learnable state of the relational graph autoencoder. Gradients use the same type.
struct GaeParams {
  DecoderKind decoder = DecoderKind::distmult;
  double transe_margin = 1.0;
  Matrix node_embeddings;  // |N|×d
  std::array<RgcnLayer, 2> layers;
  /// DistMult diagonal, TransE translation, or HolE relation vector; one per relation.
  std::array<Vector, kRelationCount> relation_vectors;

  std::size_t dim() const noexcept { return node_embeddings.cols(); }
  std::size_t node_count() const noexcept { return node_embeddings.rows(); }

  /// Flat views over every learnable array, in a fixed order.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;

  bool operator==(const GaeParams&) const = default;
};

GaeParams zeros_like(const GaeParams& p);

/// Node embeddings ~ N(0, 0.1²); weights ~ U(±√(6/(2d))); relation vectors ~ N(0, 0.1²).
GaeParams init_gae_params(std::size_t node_count, std::size_t dim, DecoderKind decoder, std::uint64_t seed,
                          double transe_margin = 1.0);

/// Incoming-neighbour lists per relation, the message structure the encoder runs on.
class MessageGraph {
 public:
  MessageGraph(std::size_t node_count, std::span<const Edge> edges);

  std::size_t node_count() const noexcept { return node_count_; }
  /// Nodes with at least one incoming edge of relation r, ascending.
  const std::vector<NodeIndex>& receivers(RelationType r) const { return receivers_[relation_index(r)]; }
  /// Sources of incoming r-edges of receivers(r)[slot].
  std::span<const NodeIndex> neighbours(RelationType r, std::size_t slot) const;

 private:
  std::size_t node_count_;
  std::array<std::vector<NodeIndex>, kRelationCount> receivers_;
  std::array<std::vector<std::size_t>, kRelationCount> offsets_;
  std::array<std::vector<NodeIndex>, kRelationCount> sources_;
};

struct EncoderCache {
  Matrix input;
  std::array<Matrix, kRelationCount> agg1;  // mean neighbour inputs, one row per receiver
  Matrix pre1;                              // layer-1 pre-activation
  Matrix hidden;                            // relu(pre1)
  std::array<Matrix, kRelationCount> agg2;
  Matrix output;
};

/// Two-layer RGCN: h¹ = relu(W₀¹x + Σ_r mean_{j∈N^r} W_r¹x_j), h = W₀²h¹ + Σ_r mean W_r²h¹_j.
Matrix encode(const GaeParams& params, const MessageGraph& messages, const Matrix& input,
              EncoderCache* cache = nullptr);
/// Encodes every graph node from params.node_embeddings.
Matrix encode_nodes(const GaeParams& params, const MessageGraph& messages);
Matrix encode_nodes(const GaeParams& params, const RelationGraph& graph, std::span<const Edge> message_edges);

/// Accumulates weight gradients into `grads` and returns dLoss/dInput.
Matrix encode_backward(const GaeParams& params, const MessageGraph& messages, const EncoderCache& cache,
                       const Matrix& grad_output, GaeParams& grads);

struct Triplet {
  NodeIndex src = 0;
  RelationType relation = RelationType::interaction;
  NodeIndex dst = 0;
  bool truth = false;

  bool operator==(const Triplet&) const = default;
};

double logistic(double x) noexcept;

/// Decoder logit before the logistic.
double raw_score(const GaeParams& params, std::span<const double> src, RelationType r,
                 std::span<const double> dst);
/// Adds upstream·∂raw/∂· into the three gradient spans.
void raw_score_backward(const GaeParams& params, std::span<const double> src, RelationType r,
                        std::span<const double> dst, double upstream, std::span<double> grad_src,
                        std::span<double> grad_dst, std::span<double> grad_rel);

double score_triplet(const GaeParams& params, const Matrix& h, const Triplet& t);

/// Binary cross-entropy averaged over U (= 1/(2|Ê|) Σ), log arguments clamped at 1e-12.
double gae_loss(std::span<const double> scores, std::span<const Triplet> triplets);

/// log σ(x), accurate for large |x|.
double log_sigmoid(double x) noexcept;
/// gae_loss evaluated from decoder logits without forming 1 − σ.
double gae_loss_from_logits(std::span<const double> logits, std::span<const Triplet> triplets);

enum class MessagePassing : std::uint8_t { kept_plus_interaction, all_edges };

struct GaeTrainConfig {
  double learning_rate = 1e-2;
  std::size_t epochs = 2000;
  std::size_t triplet_batch = 100000;
  double edge_keep_fraction = 0.5;
  std::uint64_t seed = 1;
  std::size_t dim = 64;
  DecoderKind decoder = DecoderKind::distmult;
  double transe_margin = 1.0;
  MessagePassing message_passing = MessagePassing::kept_plus_interaction;

  void validate() const;
};

/// Every graph edge under its current type (retyped edges appear as interaction).
std::vector<Edge> supervision_edges(const RelationGraph& graph);

/// The fixed per-run subsample Ê.
std::vector<Edge> sample_kept_edges(const RelationGraph& graph, const GaeTrainConfig& cfg);

/// U for one epoch: each kept edge followed by one corruption of a random slot
/// (src, dst or relation), resampled until it is not a graph triplet (≤100 retries).
std::vector<Triplet> build_training_triplets(const RelationGraph& graph, std::span<const Edge> kept,
                                             const GaeTrainConfig& cfg, std::size_t epoch);
std::vector<Triplet> build_training_triplets(const RelationGraph& graph, const GaeTrainConfig& cfg,
                                             std::size_t epoch);

struct GaeObjective {
  double loss = 0.0;
  GaeParams grad;
};

/// Loss over U and, when requested, its analytic gradient.
GaeObjective gae_objective(const GaeParams& params, const MessageGraph& messages, std::span<const Triplet> u,
                           bool with_gradient = true);

struct GaeTrainResult {
  GaeParams params;
  std::vector<Edge> kept_edges;
  std::vector<Edge> message_edges;
  std::vector<double> loss_history;  // one entry per epoch, measured before the step
  double final_loss = 0.0;           // loss after the last step on the last epoch's U
};

/// Encoder message edges: Ê plus every interaction edge, or all edges.
std::vector<Edge> message_edges_for(const RelationGraph& graph, std::span<const Edge> kept, MessagePassing mode);

/// Throws DivergenceError on a non-finite loss.
GaeTrainResult train_gae(const RelationGraph& graph, const GaeTrainConfig& cfg);
GaeTrainResult train_gae(const RelationGraph& graph, const GaeTrainConfig& cfg, GaeParams init);

/// Called after every epoch with the 1-based epoch count; returning false stops training.
using GaeEpochObserver = std::function<bool(std::size_t epoch, const GaeParams& params)>;
GaeTrainResult train_gae(const RelationGraph& graph, const GaeTrainConfig& cfg, GaeParams init,
                         const GaeEpochObserver& observer);

/// Fraction of triplets whose score lands on the correct side of `threshold`.
double triplet_accuracy(const GaeParams& params, const MessageGraph& messages, std::span<const Triplet> triplets,
                        double threshold = 0.5);

/// Max |analytic − numeric| / max(1e-8, |numeric|) of the GAE loss gradient over
/// `probe_count` random coordinates, using central differences and all graph
/// edges both as messages and as positive triplets.
double finite_diff_check(const GaeParams& params, const RelationGraph& graph, std::size_t probe_count,
                         double eps, std::uint64_t seed = 7);

}  // namespace relstance
