#pragma once

#include <span>
#include <vector>

#include "relstance/autoenc.hpp"
#include "relstance/classifier.hpp"

namespace relstance {

// Plain extended-precision forward passes, written without the sparse kernels.
// Finite-difference checks difference these, so loss rounding stays far below
// gradients of order 1e-9 that saturated sigmoids produce.

using RefMatrix = std::vector<std::vector<long double>>;

/// Two-layer RGCN over `message_edges`, one row per input row.
RefMatrix reference_encode(const GaeParams& params, std::span<const Edge> message_edges, const Matrix& input);

long double reference_raw_score(const GaeParams& params, std::span<const long double> src, RelationType r,
                                std::span<const long double> dst);

/// Clamped cross-entropy over U, encoder run on params.node_embeddings.
long double reference_gae_loss(const GaeParams& params, std::span<const Edge> message_edges,
                               std::span<const Triplet> u);

/// Same value as training_loss(...).total.
long double reference_classifier_loss(std::span<const LabeledExample> batch, const ClassifierParams& params,
                                      const GaeParams& gae, const RelationGraph& graph, double lambda_recon);

}  // namespace relstance
