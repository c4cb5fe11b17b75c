#include "relstance/autoenc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "relstance/adam.hpp"
#include "relstance/errors.hpp"
#include "relstance/gradcheck.hpp"
#include "relstance/reference.hpp"
#include "relstance/random.hpp"

namespace relstance {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kKeepStream = 0x6b656570ULL;
constexpr std::uint64_t kNegativeStream = 0x6e6567ULL;
constexpr double kLogClamp = 1e-12;
constexpr int kCorruptionRetries = 100;

std::uint64_t pair_key(NodeIndex s, NodeIndex d) { return (std::uint64_t{s} << 32) | d; }

void check_dims(const GaeParams& p, const MessageGraph& mg, const Matrix& input) {
  const std::size_t d = p.dim();
  if (d == 0) throw std::invalid_argument("encoder dimension must be positive");
  if (input.rows() != mg.node_count() || input.cols() != d)
    throw std::invalid_argument("encoder input is " + std::to_string(input.rows()) + "x" +
                                std::to_string(input.cols()) + ", expected " + std::to_string(mg.node_count()) +
                                "x" + std::to_string(d));
  for (const auto& layer : p.layers) {
    if (layer.self.rows() != d || layer.self.cols() != d) throw std::invalid_argument("W_0 dimension mismatch");
    for (const auto& w : layer.relation) {
      if (w.rows() != d || w.cols() != d) throw std::invalid_argument("W_r dimension mismatch");
    }
  }
}

Matrix layer_forward(const RgcnLayer& w, const MessageGraph& mg, const Matrix& x,
                     std::array<Matrix, kRelationCount>& agg) {
  Matrix out(x.rows(), w.self.rows());
  rows_apply_add(x, w.self, out);
  for (auto r : kAllRelations) {
    const auto ri = relation_index(r);
    const auto& recv = mg.receivers(r);
    agg[ri] = Matrix(recv.size(), x.cols());
    for (std::size_t slot = 0; slot < recv.size(); ++slot) {
      auto nb = mg.neighbours(r, slot);
      auto row = agg[ri].row(slot);
      const double inv = 1.0 / static_cast<double>(nb.size());
      for (NodeIndex j : nb) axpy(inv, x.row(j), row);
      gemv_add(w.relation[ri], row, out.row(recv[slot]));
    }
  }
  return out;
}

Matrix layer_backward(const RgcnLayer& w, RgcnLayer& gw, const MessageGraph& mg, const Matrix& x,
                      const std::array<Matrix, kRelationCount>& agg, const Matrix& dout) {
  accumulate_outer_rows(dout, x, gw.self);
  Matrix dx(x.rows(), x.cols());
  rows_apply_transposed_add(dout, w.self, dx);
  Vector tmp(x.cols());
  for (auto r : kAllRelations) {
    const auto ri = relation_index(r);
    const auto& recv = mg.receivers(r);
    for (std::size_t slot = 0; slot < recv.size(); ++slot) {
      auto d_i = dout.row(recv[slot]);
      outer_add(gw.relation[ri], d_i, agg[ri].row(slot));
      std::fill(tmp.begin(), tmp.end(), 0.0);
      gemv_transposed_add(w.relation[ri], d_i, tmp);
      auto nb = mg.neighbours(r, slot);
      const double inv = 1.0 / static_cast<double>(nb.size());
      for (NodeIndex j : nb) axpy(inv, tmp, dx.row(j));
    }
  }
  return dx;
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double limit, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = rng.uniform(-limit, limit);
  return m;
}

NodeIndex draw_other(Rng& rng, std::size_t n, std::size_t current) {
  std::size_t v = rng.index(n - 1);
  if (v >= current) ++v;
  return static_cast<NodeIndex>(v);
}

}  // namespace

std::string_view to_string(DecoderKind k) noexcept {
  switch (k) {
    case DecoderKind::distmult: return "distmult";
    case DecoderKind::transe: return "transe";
    case DecoderKind::hole: return "hole";
  }
  return "distmult";
}

std::optional<DecoderKind> parse_decoder(std::string_view s) noexcept {
  if (s == "distmult") return DecoderKind::distmult;
  if (s == "transe") return DecoderKind::transe;
  if (s == "hole") return DecoderKind::hole;
  return std::nullopt;
}

std::vector<std::span<double>> GaeParams::blocks() {
  std::vector<std::span<double>> out;
  out.push_back(node_embeddings.values());
  for (auto& layer : layers) {
    out.push_back(layer.self.values());
    for (auto& w : layer.relation) out.push_back(w.values());
  }
  for (auto& v : relation_vectors) out.push_back(v);
  return out;
}

std::vector<std::span<const double>> GaeParams::blocks() const {
  std::vector<std::span<const double>> out;
  for (auto b : const_cast<GaeParams*>(this)->blocks()) out.emplace_back(b);
  return out;
}

GaeParams zeros_like(const GaeParams& p) {
  GaeParams z;
  z.decoder = p.decoder;
  z.transe_margin = p.transe_margin;
  z.node_embeddings = Matrix(p.node_embeddings.rows(), p.node_embeddings.cols());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    z.layers[l].self = Matrix(p.layers[l].self.rows(), p.layers[l].self.cols());
    for (std::size_t r = 0; r < kRelationCount; ++r)
      z.layers[l].relation[r] = Matrix(p.layers[l].relation[r].rows(), p.layers[l].relation[r].cols());
  }
  for (std::size_t r = 0; r < kRelationCount; ++r) z.relation_vectors[r].assign(p.relation_vectors[r].size(), 0.0);
  return z;
}

GaeParams init_gae_params(std::size_t node_count, std::size_t dim, DecoderKind decoder, std::uint64_t seed,
                          double transe_margin) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  Rng rng(seed, {kInitStream});
  GaeParams p;
  p.decoder = decoder;
  p.transe_margin = transe_margin;
  p.node_embeddings = Matrix(node_count, dim);
  for (auto& v : p.node_embeddings.values()) v = rng.normal(0.0, 0.1);
  const double limit = std::sqrt(6.0 / static_cast<double>(2 * dim));
  for (auto& layer : p.layers) {
    layer.self = uniform_matrix(dim, dim, limit, rng);
    for (auto& w : layer.relation) w = uniform_matrix(dim, dim, limit, rng);
  }
  for (auto& v : p.relation_vectors) {
    v.resize(dim);
    for (auto& x : v) x = rng.normal(0.0, 0.1);
  }
  return p;
}

MessageGraph::MessageGraph(std::size_t node_count, std::span<const Edge> edges) : node_count_(node_count) {
  std::array<std::vector<std::vector<NodeIndex>>, kRelationCount> incoming;
  for (auto& v : incoming) v.resize(node_count);
  for (const auto& e : edges) {
    if (e.src >= node_count || e.dst >= node_count) throw std::out_of_range("message edge endpoint out of range");
    incoming[relation_index(e.relation)][e.dst].push_back(e.src);
  }
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    offsets_[r].push_back(0);
    for (NodeIndex i = 0; i < node_count; ++i) {
      const auto& in = incoming[r][i];
      if (in.empty()) continue;
      receivers_[r].push_back(i);
      sources_[r].insert(sources_[r].end(), in.begin(), in.end());
      offsets_[r].push_back(sources_[r].size());
    }
  }
}

std::span<const NodeIndex> MessageGraph::neighbours(RelationType r, std::size_t slot) const {
  const auto ri = relation_index(r);
  const auto begin = offsets_[ri][slot];
  const auto end = offsets_[ri][slot + 1];
  return {sources_[ri].data() + begin, end - begin};
}

Matrix encode(const GaeParams& params, const MessageGraph& messages, const Matrix& input, EncoderCache* cache) {
  check_dims(params, messages, input);
  EncoderCache local;
  EncoderCache& c = cache ? *cache : local;
  c.input = input;
  c.pre1 = layer_forward(params.layers[0], messages, input, c.agg1);
  c.hidden = c.pre1;
  for (auto& v : c.hidden.values()) v = v > 0.0 ? v : 0.0;
  c.output = layer_forward(params.layers[1], messages, c.hidden, c.agg2);
  return c.output;
}

Matrix encode_nodes(const GaeParams& params, const MessageGraph& messages) {
  return encode(params, messages, params.node_embeddings);
}

Matrix encode_nodes(const GaeParams& params, const RelationGraph& graph, std::span<const Edge> message_edges) {
  for (const auto& e : message_edges) {
    if (!graph.contains(e)) throw std::invalid_argument("message edge is not a graph edge");
  }
  return encode_nodes(params, MessageGraph(graph.node_count(), message_edges));
}

Matrix encode_backward(const GaeParams& params, const MessageGraph& messages, const EncoderCache& cache,
                       const Matrix& grad_output, GaeParams& grads) {
  Matrix d_hidden = layer_backward(params.layers[1], grads.layers[1], messages, cache.hidden, cache.agg2, grad_output);
  for (std::size_t i = 0; i < d_hidden.values().size(); ++i) {
    if (!(cache.pre1.values()[i] > 0.0)) d_hidden.values()[i] = 0.0;
  }
  return layer_backward(params.layers[0], grads.layers[0], messages, cache.input, cache.agg1, d_hidden);
}

double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double raw_score(const GaeParams& params, std::span<const double> src, RelationType r,
                 std::span<const double> dst) {
  const auto& rel = params.relation_vectors[relation_index(r)];
  const std::size_t d = rel.size();
  if (src.size() != d || dst.size() != d) throw std::invalid_argument("decoder dimension mismatch");
  switch (params.decoder) {
    case DecoderKind::distmult: {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += rel[k] * (src[k] * dst[k]);
      return s;
    }
    case DecoderKind::transe: {
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double v = src[k] + rel[k] - dst[k];
        sq += v * v;
      }
      return params.transe_margin - std::sqrt(sq);
    }
    case DecoderKind::hole: {
      // r · (src ⋆ dst), [a ⋆ b]_k = Σ_i a_i b_{(i+k) mod d}
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        double corr = 0.0;
        for (std::size_t i = 0; i < d; ++i) corr += src[i] * dst[(i + k) % d];
        s += rel[k] * corr;
      }
      return s;
    }
  }
  return 0.0;
}

void raw_score_backward(const GaeParams& params, std::span<const double> src, RelationType r,
                        std::span<const double> dst, double upstream, std::span<double> grad_src,
                        std::span<double> grad_dst, std::span<double> grad_rel) {
  const auto& rel = params.relation_vectors[relation_index(r)];
  const std::size_t d = rel.size();
  switch (params.decoder) {
    case DecoderKind::distmult:
      for (std::size_t k = 0; k < d; ++k) {
        grad_src[k] += upstream * rel[k] * dst[k];
        grad_dst[k] += upstream * rel[k] * src[k];
        grad_rel[k] += upstream * src[k] * dst[k];
      }
      return;
    case DecoderKind::transe: {
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double v = src[k] + rel[k] - dst[k];
        sq += v * v;
      }
      const double norm = std::sqrt(sq);
      if (norm == 0.0) return;  // subgradient 0 at the cusp
      for (std::size_t k = 0; k < d; ++k) {
        const double g = upstream * (src[k] + rel[k] - dst[k]) / norm;
        grad_src[k] -= g;
        grad_rel[k] -= g;
        grad_dst[k] += g;
      }
      return;
    }
    case DecoderKind::hole:
      for (std::size_t k = 0; k < d; ++k) {
        double corr = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const std::size_t j = (i + k) % d;
          corr += src[i] * dst[j];
          grad_src[i] += upstream * rel[k] * dst[j];
          grad_dst[j] += upstream * rel[k] * src[i];
        }
        grad_rel[k] += upstream * corr;
      }
      return;
  }
}

double score_triplet(const GaeParams& params, const Matrix& h, const Triplet& t) {
  if (t.src >= h.rows() || t.dst >= h.rows()) throw std::out_of_range("triplet endpoint out of range");
  return logistic(raw_score(params, h.row(t.src), t.relation, h.row(t.dst)));
}

double gae_loss(std::span<const double> scores, std::span<const Triplet> triplets) {
  if (triplets.empty()) throw std::invalid_argument("gae_loss: empty triplet set");
  if (scores.size() != triplets.size()) throw std::invalid_argument("gae_loss: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    sum += triplets[i].truth ? std::log(std::max(s, kLogClamp)) : std::log(std::max(1.0 - s, kLogClamp));
  }
  return -sum / static_cast<double>(scores.size());
}

double log_sigmoid(double x) noexcept { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double gae_loss_from_logits(std::span<const double> logits, std::span<const Triplet> triplets) {
  if (triplets.empty()) throw std::invalid_argument("gae_loss: empty triplet set");
  if (logits.size() != triplets.size()) throw std::invalid_argument("gae_loss: size mismatch");
  const double floor = std::log(kLogClamp);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    sum += std::max(log_sigmoid(triplets[i].truth ? logits[i] : -logits[i]), floor);
  return -sum / static_cast<double>(logits.size());
}

void GaeTrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("GAE learning rate must be positive");
  if (!(edge_keep_fraction > 0.0 && edge_keep_fraction <= 1.0))
    throw std::invalid_argument("edge keep fraction must lie in (0, 1]");
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  if (triplet_batch == 0) throw std::invalid_argument("triplet batch must be positive");
}

std::vector<Edge> supervision_edges(const RelationGraph& graph) { return graph.edges(); }

std::vector<Edge> sample_kept_edges(const RelationGraph& graph, const GaeTrainConfig& cfg) {
  const auto all = supervision_edges(graph);
  if (all.empty()) throw std::invalid_argument("graph has no supervision edges");
  const auto n = all.size();
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.edge_keep_fraction * static_cast<double>(n))), 1, n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(cfg.seed, {kKeepStream});
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<Edge> kept;
  kept.reserve(k);
  for (auto i : idx) kept.push_back(all[i]);
  return kept;
}

std::vector<Triplet> build_training_triplets(const RelationGraph& graph, std::span<const Edge> kept,
                                             const GaeTrainConfig& cfg, std::size_t epoch) {
  if (kept.empty()) throw std::invalid_argument("no supervision edges to corrupt");
  const std::size_t n = graph.node_count();
  Rng rng(cfg.seed, {kNegativeStream, epoch});
  std::vector<Triplet> u;
  u.reserve(2 * kept.size());
  for (const auto& e : kept) {
    const Triplet truth{e.src, e.relation, e.dst, true};
    u.push_back(truth);
    Triplet c = truth;
    for (int attempt = 0; attempt <= kCorruptionRetries; ++attempt) {
      c = truth;
      switch (rng.index(3)) {
        case 0: c.src = draw_other(rng, n, truth.src); break;
        case 1: c.dst = draw_other(rng, n, truth.dst); break;
        default:
          c.relation = kAllRelations[draw_other(rng, kRelationCount, relation_index(truth.relation))];
          break;
      }
      if (!graph.contains({c.src, c.relation, c.dst})) break;
    }
    c.truth = false;
    u.push_back(c);
  }
  return u;
}

std::vector<Triplet> build_training_triplets(const RelationGraph& graph, const GaeTrainConfig& cfg,
                                             std::size_t epoch) {
  const auto kept = sample_kept_edges(graph, cfg);
  return build_training_triplets(graph, kept, cfg, epoch);
}

GaeObjective gae_objective(const GaeParams& params, const MessageGraph& messages, std::span<const Triplet> u,
                           bool with_gradient) {
  EncoderCache cache;
  const Matrix h = encode(params, messages, params.node_embeddings, &cache);
  std::vector<double> logits(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    logits[i] = raw_score(params, h.row(u[i].src), u[i].relation, h.row(u[i].dst));

  GaeObjective out;
  out.loss = gae_loss_from_logits(logits, u);
  if (!with_gradient) return out;

  out.grad = zeros_like(params);
  Matrix dh(h.rows(), h.cols());
  const double inv = 1.0 / static_cast<double>(u.size());
  const double floor = std::log(kLogClamp);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = u[i].truth ? logits[i] : -logits[i];
    // d/draw of the clamped cross-entropy term; zero where the clamp is active.
    if (log_sigmoid(x) <= floor) continue;
    double g = u[i].truth ? -logistic(-logits[i]) : logistic(logits[i]);
    g *= inv;
    if (g == 0.0) continue;
    raw_score_backward(params, h.row(u[i].src), u[i].relation, h.row(u[i].dst), g, dh.row(u[i].src),
                       dh.row(u[i].dst), out.grad.relation_vectors[relation_index(u[i].relation)]);
  }
  out.grad.node_embeddings = encode_backward(params, messages, cache, dh, out.grad);
  return out;
}

std::vector<Edge> message_edges_for(const RelationGraph& graph, std::span<const Edge> kept, MessagePassing mode) {
  if (mode == MessagePassing::all_edges) return graph.edges();
  std::unordered_set<std::uint64_t> kept_keys;
  for (const auto& e : kept) kept_keys.insert(pair_key(e.src, e.dst));
  std::vector<Edge> out;
  for (const auto& e : graph.edges()) {
    if (e.relation == RelationType::interaction || kept_keys.contains(pair_key(e.src, e.dst))) out.push_back(e);
  }
  return out;
}

GaeTrainResult train_gae(const RelationGraph& graph, const GaeTrainConfig& cfg) {
  return train_gae(graph, cfg, init_gae_params(graph.node_count(), cfg.dim, cfg.decoder, cfg.seed, cfg.transe_margin));
}

GaeTrainResult train_gae(const RelationGraph& graph, const GaeTrainConfig& cfg, GaeParams init) {
  return train_gae(graph, cfg, std::move(init), {});
}

GaeTrainResult train_gae(const RelationGraph& graph, const GaeTrainConfig& cfg, GaeParams init,
                         const GaeEpochObserver& observer) {
  cfg.validate();
  if (init.node_count() != graph.node_count())
    throw std::invalid_argument("GAE parameters cover " + std::to_string(init.node_count()) + " nodes, graph has " +
                                std::to_string(graph.node_count()));
  GaeTrainResult res;
  res.params = std::move(init);
  res.kept_edges = sample_kept_edges(graph, cfg);

  res.message_edges = message_edges_for(graph, res.kept_edges, cfg.message_passing);
  const MessageGraph messages(graph.node_count(), res.message_edges);

  auto param_blocks = res.params.blocks();
  Adam opt({cfg.learning_rate}, param_blocks);
  std::vector<Triplet> u;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    u = build_training_triplets(graph, res.kept_edges, cfg, epoch);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < u.size(); begin += cfg.triplet_batch) {
      const std::size_t end = std::min(u.size(), begin + cfg.triplet_batch);
      std::span<const Triplet> chunk(u.data() + begin, end - begin);
      auto obj = gae_objective(res.params, messages, chunk);
      if (!std::isfinite(obj.loss)) throw DivergenceError(epoch, "graph autoencoder");
      epoch_loss += obj.loss * static_cast<double>(chunk.size());
      opt.step(param_blocks, obj.grad.blocks());
    }
    res.loss_history.push_back(epoch_loss / static_cast<double>(u.size()));
    if (observer && !observer(epoch + 1, res.params)) break;
  }
  if (u.empty()) u = build_training_triplets(graph, res.kept_edges, cfg, 0);
  res.final_loss = gae_objective(res.params, messages, u, false).loss;
  if (!std::isfinite(res.final_loss)) throw DivergenceError(cfg.epochs, "graph autoencoder");
  return res;
}

double triplet_accuracy(const GaeParams& params, const MessageGraph& messages, std::span<const Triplet> triplets,
                        double threshold) {
  if (triplets.empty()) throw std::invalid_argument("triplet_accuracy: no triplets");
  const Matrix h = encode_nodes(params, messages);
  std::size_t correct = 0;
  for (const auto& t : triplets) {
    if ((score_triplet(params, h, t) >= threshold) == t.truth) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(triplets.size());
}

double finite_diff_check(const GaeParams& params, const RelationGraph& graph, std::size_t probe_count, double eps,
                         std::uint64_t seed) {
  GaeTrainConfig cfg;
  cfg.seed = seed;
  cfg.edge_keep_fraction = 1.0;
  cfg.dim = params.dim();
  const auto kept = supervision_edges(graph);
  const auto u = build_training_triplets(graph, kept, cfg, 0);
  const MessageGraph messages(graph.node_count(), graph.edges());

  GaeParams probe = params;
  const auto analytic = gae_objective(probe, messages, u).grad;
  Rng rng(seed);
  return max_relative_gradient_error(probe.blocks(), analytic.blocks(),
                                     [&] { return reference_gae_loss(probe, graph.edges(), u); }, probe_count, eps,
                                     rng);
}

}  // namespace relstance
