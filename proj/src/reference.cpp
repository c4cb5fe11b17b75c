#include "relstance/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relstance {

namespace {

using Real = long double;
using RefVector = std::vector<Real>;

RefVector matvec(const Matrix& w, const RefVector& x) {
  RefVector y(w.rows(), 0.0L);
  for (std::size_t o = 0; o < w.rows(); ++o)
    for (std::size_t k = 0; k < w.cols(); ++k) y[o] += static_cast<Real>(w(o, k)) * x[k];
  return y;
}

RefMatrix layer(const RgcnLayer& w, std::span<const Edge> edges, const RefMatrix& x) {
  const std::size_t n = x.size();
  RefMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = matvec(w.self, x[i]);
  for (auto r : kAllRelations) {
    std::vector<RefVector> sum(n);
    std::vector<std::size_t> count(n, 0);
    for (const auto& e : edges) {
      if (e.relation != r) continue;
      const RefVector m = matvec(w.relation[relation_index(r)], x[e.src]);
      if (sum[e.dst].empty()) sum[e.dst].assign(m.size(), 0.0L);
      for (std::size_t k = 0; k < m.size(); ++k) sum[e.dst][k] += m[k];
      ++count[e.dst];
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < sum[i].size(); ++k) out[i][k] += sum[i][k] / static_cast<Real>(count[i]);
  }
  return out;
}

Real log_sigmoid_ref(Real x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

}  // namespace

RefMatrix reference_encode(const GaeParams& params, std::span<const Edge> message_edges, const Matrix& input) {
  RefMatrix x(input.rows());
  for (std::size_t i = 0; i < input.rows(); ++i) x[i].assign(input.row(i).begin(), input.row(i).end());
  for (const auto& e : message_edges)
    if (e.src >= x.size() || e.dst >= x.size()) throw std::out_of_range("message edge outside the input rows");
  RefMatrix h = layer(params.layers[0], message_edges, x);
  for (auto& row : h)
    for (auto& v : row) v = std::max(v, 0.0L);
  return layer(params.layers[1], message_edges, h);
}

long double reference_raw_score(const GaeParams& params, std::span<const long double> src, RelationType r,
                                std::span<const long double> dst) {
  const auto& rel = params.relation_vectors[relation_index(r)];
  const std::size_t d = rel.size();
  Real s = 0.0L;
  switch (params.decoder) {
    case DecoderKind::distmult:
      for (std::size_t k = 0; k < d; ++k) s += src[k] * rel[k] * dst[k];
      return s;
    case DecoderKind::transe:
      for (std::size_t k = 0; k < d; ++k) {
        const Real v = src[k] + rel[k] - dst[k];
        s += v * v;
      }
      return static_cast<Real>(params.transe_margin) - std::sqrt(s);
    case DecoderKind::hole:
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t i = 0; i < d; ++i) s += rel[k] * src[i] * dst[(i + k) % d];
      return s;
  }
  return s;
}

long double reference_gae_loss(const GaeParams& params, std::span<const Edge> message_edges,
                               std::span<const Triplet> u) {
  if (u.empty()) throw std::invalid_argument("empty triplet set");
  const RefMatrix h = reference_encode(params, message_edges, params.node_embeddings);
  const Real floor = std::log(1e-12L);
  Real sum = 0.0L;
  for (const auto& t : u) {
    const Real x = reference_raw_score(params, h[t.src], t.relation, h[t.dst]);
    sum += std::max(log_sigmoid_ref(t.truth ? x : -x), floor);
  }
  return -sum / static_cast<Real>(u.size());
}

long double reference_classifier_loss(std::span<const LabeledExample> batch, const ClassifierParams& params,
                                      const GaeParams& gae, const RelationGraph& graph, double lambda_recon) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Real stance = 0.0L;
  Real recon = 0.0L;
  for (const auto& ex : batch) {
    RefVector x(ex.text.begin(), ex.text.end());
    if (params.use_relations) {
      const Subgraph sub = extract_subgraph(graph, ex.comment_author, ex.reply_author, 1);
      Matrix input(sub.to_parent.size(), gae.dim());
      for (std::size_t i = 0; i < sub.to_parent.size(); ++i)
        for (std::size_t k = 0; k < gae.dim(); ++k) input(i, k) = gae.node_embeddings(sub.to_parent[i], k);
      const RefMatrix h = reference_encode(gae, sub.graph.edges(), input);
      RefVector mean(gae.dim(), 0.0L);
      for (const auto& row : h)
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += row[k];
      for (auto& v : mean) v /= static_cast<Real>(h.size());

      RefVector h_r = matvec(params.rel_proj, mean);
      for (std::size_t k = 0; k < h_r.size(); ++k) h_r[k] += params.rel_bias[k];
      RefVector back = matvec(params.recon, h_r);
      for (std::size_t k = 0; k < back.size(); ++k) {
        const Real diff = back[k] + params.recon_bias[k] - mean[k];
        recon += diff * diff;
      }
      if (params.fusion == FusionMode::concat) {
        x.insert(x.end(), h_r.begin(), h_r.end());
      } else {
        for (std::size_t k = 0; k < x.size(); ++k) x[k] += h_r[k];
      }
    }
    RefVector z = matvec(params.fusion_weight, x);
    for (std::size_t c = 0; c < z.size(); ++c) z[c] += params.fusion_bias[c];
    const Real m = *std::max_element(z.begin(), z.end());
    Real sum = 0.0L;
    for (Real v : z) sum += std::exp(v - m);
    stance -= z[class_index(ex.gold)] - m - std::log(sum);
  }
  const Real n = static_cast<Real>(batch.size());
  return stance / n + static_cast<Real>(lambda_recon) * recon / n;
}

}  // namespace relstance
