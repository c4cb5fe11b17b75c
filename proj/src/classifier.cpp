#include "relstance/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "relstance/adam.hpp"
#include "relstance/errors.hpp"
#include "relstance/gradcheck.hpp"
#include "relstance/metrics.hpp"
#include "relstance/random.hpp"
#include "relstance/reference.hpp"

namespace relstance {

namespace {

constexpr std::uint64_t kHeadStream = 0x68656164ULL;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;

Matrix xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (auto& v : m.values()) v = rng.uniform(-limit, limit);
  return m;
}

std::size_t fused_width(const ClassifierParams& p, std::size_t text_dim) {
  if (p.use_relations && p.fusion == FusionMode::concat) return text_dim + p.rel_out_dim();
  return text_dim;
}

// Per-example graph input: a cached mean when the encoder is frozen, the query graph otherwise.
struct ExampleContext {
  const LabeledExample* example = nullptr;
  const Vector* graph_mean = nullptr;
  const QueryGraph* query = nullptr;
};

Vector fuse(std::span<const double> text, std::span<const double> relation, const ClassifierParams& p) {
  Vector x(text.begin(), text.end());
  if (!p.use_relations) return x;
  if (p.fusion == FusionMode::concat) {
    x.insert(x.end(), relation.begin(), relation.end());
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += relation[i];
  }
  return x;
}

std::array<double, kStanceCount> softmax_logits(const Vector& x, const ClassifierParams& p,
                                                std::array<double, kStanceCount>* log_probs) {
  std::array<double, kStanceCount> z{};
  for (std::size_t c = 0; c < kStanceCount; ++c) z[c] = p.fusion_bias[c] + dot(p.fusion_weight.row(c), x);
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  const double log_sum = m + std::log(sum);
  std::array<double, kStanceCount> probs{};
  for (std::size_t c = 0; c < kStanceCount; ++c) {
    probs[c] = std::exp(z[c] - log_sum);
    if (log_probs) (*log_probs)[c] = z[c] - log_sum;
  }
  return probs;
}

Vector project(const ClassifierParams& p, std::span<const double> graph_mean) {
  Vector h = p.rel_bias;
  gemv_add(p.rel_proj, graph_mean, h);
  return h;
}

void check_text(const LabeledExample& ex, const ClassifierParams& p) {
  if (ex.text.size() != p.text_dim())
    throw std::invalid_argument("example " + ex.id + ": text vector has " + std::to_string(ex.text.size()) +
                                " entries, classifier expects " + std::to_string(p.text_dim()));
}

ClassifierLoss context_loss(std::span<const ExampleContext> batch, const ClassifierParams& params,
                            const GaeParams& gae, double lambda, bool finetune) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  ClassifierLoss out;
  out.grad = zeros_like(params);
  if (finetune) out.gae_grad = zeros_like(gae);
  const double inv = 1.0 / static_cast<double>(batch.size());

  for (const auto& ctx : batch) {
    const auto& ex = *ctx.example;
    check_text(ex, params);

    Vector graph_mean;
    EncoderCache cache;
    if (params.use_relations) {
      if (ctx.graph_mean) {
        graph_mean = *ctx.graph_mean;
      } else {
        graph_mean = subgraph_mean(gae, *ctx.query, finetune ? &cache : nullptr);
      }
    }
    const Vector h_r = params.use_relations ? project(params, graph_mean) : Vector{};
    const Vector x = fuse(ex.text, h_r, params);
    std::array<double, kStanceCount> log_probs{};
    const auto probs = softmax_logits(x, params, &log_probs);
    const std::size_t y = class_index(ex.gold);
    out.stance -= log_probs[y] * inv;

    Vector dz(kStanceCount);
    for (std::size_t c = 0; c < kStanceCount; ++c) dz[c] = (probs[c] - (c == y ? 1.0 : 0.0)) * inv;
    outer_add(out.grad.fusion_weight, dz, x);
    axpy(1.0, dz, out.grad.fusion_bias);
    if (!params.use_relations) continue;

    Vector dx(x.size(), 0.0);
    gemv_transposed_add(params.fusion_weight, dz, dx);
    Vector dh_r(h_r.size(), 0.0);
    const std::size_t offset = params.fusion == FusionMode::concat ? ex.text.size() : 0;
    for (std::size_t i = 0; i < dh_r.size(); ++i) dh_r[i] = dx[offset + i];

    Vector residual = params.recon_bias;
    gemv_add(params.recon, h_r, residual);
    for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= graph_mean[i];
    out.recon += squared_norm(residual) * inv;

    Vector dres(residual.size());
    for (std::size_t i = 0; i < residual.size(); ++i) dres[i] = 2.0 * lambda * residual[i] * inv;
    outer_add(out.grad.recon, dres, h_r);
    axpy(1.0, dres, out.grad.recon_bias);
    gemv_transposed_add(params.recon, dres, dh_r);

    outer_add(out.grad.rel_proj, dh_r, graph_mean);
    axpy(1.0, dh_r, out.grad.rel_bias);

    if (!finetune) continue;
    Vector dmean(graph_mean.size(), 0.0);
    gemv_transposed_add(params.rel_proj, dh_r, dmean);
    axpy(-1.0, dres, dmean);

    const auto& query = *ctx.query;
    const std::size_t n = query.sub.to_parent.size();
    Matrix grad_output(n, gae.dim());
    for (std::size_t i = 0; i < n; ++i) axpy(1.0 / static_cast<double>(n), dmean, grad_output.row(i));
    const Matrix dinput = encode_backward(gae, query.messages, cache, grad_output, *out.gae_grad);
    for (std::size_t i = 0; i < n; ++i)
      axpy(1.0, dinput.row(i), out.gae_grad->node_embeddings.row(query.sub.to_parent[i]));
  }
  out.total = out.stance + lambda * out.recon;
  return out;
}

// Subgraphs are shared by examples with the same author pair.
class QueryCache {
 public:
  explicit QueryCache(const RelationGraph& graph) : graph_(graph) {}

  const QueryGraph& get(NodeIndex a, NodeIndex b) {
    const auto key = std::make_pair(a, b);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, make_query_graph(graph_, a, b)).first;
    return it->second;
  }

 private:
  const RelationGraph& graph_;
  std::map<std::pair<NodeIndex, NodeIndex>, QueryGraph> cache_;
};

std::vector<Vector> graph_means(std::span<const LabeledExample> examples, const GaeParams& gae, QueryCache& queries) {
  std::vector<Vector> means;
  means.reserve(examples.size());
  std::map<std::pair<NodeIndex, NodeIndex>, Vector> memo;
  for (const auto& ex : examples) {
    const auto key = std::make_pair(ex.comment_author, ex.reply_author);
    auto it = memo.find(key);
    if (it == memo.end()) it = memo.emplace(key, subgraph_mean(gae, queries.get(key.first, key.second))).first;
    means.push_back(it->second);
  }
  return means;
}

std::vector<Prediction> predict_with_means(std::span<const LabeledExample> examples, const ClassifierParams& params,
                                           std::span<const Vector> means) {
  std::vector<Prediction> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    check_text(ex, params);
    const Vector h_r = params.use_relations ? project(params, means[i]) : Vector{};
    Prediction p;
    p.id = ex.id;
    p.gold = ex.gold;
    p.probs = softmax_logits(fuse(ex.text, h_r, params), params, nullptr);
    p.pred = kAllStances[static_cast<std::size_t>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin())];
    out.push_back(std::move(p));
  }
  return out;
}

double macro_f1_of(const std::vector<Prediction>& preds) {
  std::vector<Stance> p, g;
  for (const auto& x : preds) {
    p.push_back(x.pred);
    g.push_back(x.gold);
  }
  return compute_metrics(p, g).macro_f1;
}

}  // namespace

std::string_view to_string(FusionMode m) noexcept { return m == FusionMode::concat ? "concat" : "add"; }

std::optional<FusionMode> parse_fusion(std::string_view s) noexcept {
  if (s == "concat") return FusionMode::concat;
  if (s == "add") return FusionMode::add;
  return std::nullopt;
}

std::size_t ClassifierParams::text_dim() const noexcept {
  const std::size_t in = fusion_weight.cols();
  if (use_relations && fusion == FusionMode::concat) return in >= rel_out_dim() ? in - rel_out_dim() : 0;
  return in;
}

std::vector<std::span<double>> ClassifierParams::blocks() {
  return {rel_proj.values(), rel_bias, recon.values(), recon_bias, fusion_weight.values(), fusion_bias};
}

std::vector<std::span<const double>> ClassifierParams::blocks() const {
  return {rel_proj.values(), rel_bias, recon.values(), recon_bias, fusion_weight.values(), fusion_bias};
}

void ClassifierParams::validate() const {
  if (fusion_weight.rows() != kStanceCount || fusion_bias.size() != kStanceCount)
    throw std::invalid_argument("classifier head must have one row per stance");
  if (!use_relations) return;
  const std::size_t d = graph_dim();
  const std::size_t o = rel_out_dim();
  if (d == 0 || o == 0) throw std::invalid_argument("relation projection is empty");
  if (rel_bias.size() != o || recon.rows() != d || recon.cols() != o || recon_bias.size() != d)
    throw std::invalid_argument("relation projection and reconstruction shapes disagree");
  if (fusion == FusionMode::concat && fusion_weight.cols() <= o)
    throw std::invalid_argument("concat head narrower than the relation feature");
  if (fusion == FusionMode::add && fusion_weight.cols() != o)
    throw std::invalid_argument("add fusion needs text width equal to the relation width");
}

ClassifierParams zeros_like(const ClassifierParams& p) {
  ClassifierParams z;
  z.fusion = p.fusion;
  z.use_relations = p.use_relations;
  z.rel_proj = Matrix(p.rel_proj.rows(), p.rel_proj.cols());
  z.rel_bias.assign(p.rel_bias.size(), 0.0);
  z.recon = Matrix(p.recon.rows(), p.recon.cols());
  z.recon_bias.assign(p.recon_bias.size(), 0.0);
  z.fusion_weight = Matrix(p.fusion_weight.rows(), p.fusion_weight.cols());
  z.fusion_bias.assign(p.fusion_bias.size(), 0.0);
  return z;
}

ClassifierParams init_classifier_params(const ClassifierShape& shape, std::uint64_t seed) {
  if (shape.text_dim == 0) throw std::invalid_argument("text dimension must be positive");
  Rng rng(seed, {kHeadStream});
  ClassifierParams p;
  p.fusion = shape.fusion;
  p.use_relations = shape.use_relations;
  if (shape.use_relations) {
    if (shape.graph_dim == 0 || shape.rel_out_dim == 0)
      throw std::invalid_argument("relation dimensions must be positive");
    if (shape.fusion == FusionMode::add && shape.text_dim != shape.rel_out_dim)
      throw std::invalid_argument("add fusion needs text dimension " + std::to_string(shape.text_dim) +
                                  " to equal relation output dimension " + std::to_string(shape.rel_out_dim));
    p.rel_proj = xavier(shape.rel_out_dim, shape.graph_dim, rng);
    p.rel_bias.assign(shape.rel_out_dim, 0.0);
    p.recon = xavier(shape.graph_dim, shape.rel_out_dim, rng);
    p.recon_bias.assign(shape.graph_dim, 0.0);
  }
  p.fusion_weight = xavier(kStanceCount, fused_width(p, shape.text_dim), rng);
  p.fusion_bias.assign(kStanceCount, 0.0);
  return p;
}

QueryGraph make_query_graph(const RelationGraph& graph, NodeIndex a, NodeIndex b) {
  Subgraph sub = extract_subgraph(graph, a, b, 1);
  MessageGraph messages(sub.graph.node_count(), sub.graph.edges());
  return QueryGraph{std::move(sub), std::move(messages)};
}

Vector subgraph_mean(const GaeParams& gae, const QueryGraph& query, EncoderCache* cache) {
  const auto& nodes = query.sub.to_parent;
  Matrix input(nodes.size(), gae.dim());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] >= gae.node_count()) throw std::out_of_range("subgraph node outside the encoder's node table");
    const auto src = gae.node_embeddings.row(nodes[i]);
    std::copy(src.begin(), src.end(), input.row(i).begin());
  }
  const Matrix h = encode(gae, query.messages, input, cache);
  Vector mean(gae.dim(), 0.0);
  for (std::size_t i = 0; i < h.rows(); ++i) axpy(1.0, h.row(i), mean);
  for (auto& v : mean) v /= static_cast<double>(h.rows());
  return mean;
}

RelationFeature relation_feature(const RelationGraph& graph, const GaeParams& gae, NodeIndex a, NodeIndex b,
                                 const ClassifierParams& params) {
  RelationFeature f;
  f.graph_mean = subgraph_mean(gae, make_query_graph(graph, a, b));
  f.projected = project(params, f.graph_mean);
  return f;
}

std::array<double, kStanceCount> predict(std::span<const double> text, std::span<const double> relation,
                                         const ClassifierParams& params) {
  if (text.size() != params.text_dim()) throw std::invalid_argument("text width does not match the classifier");
  if (params.use_relations && relation.size() != params.rel_out_dim())
    throw std::invalid_argument("relation width does not match the classifier");
  return softmax_logits(fuse(text, relation, params), params, nullptr);
}

std::vector<LabeledExample> make_examples(const std::vector<InteractionRecord>& records, const RelationGraph& graph,
                                          const TextFeatureSource& text) {
  std::vector<LabeledExample> out;
  out.reserve(records.size());
  std::vector<std::string> missing;
  for (const auto& r : records) {
    if (!text.has(r)) {
      missing.push_back(r.id);
      continue;
    }
    const auto ca = graph.find_node(r.comment_author);
    const auto ra = graph.find_node(r.reply_author);
    if (!ca || !ra) throw std::invalid_argument("record " + r.id + " has an author outside the graph");
    LabeledExample ex;
    ex.id = r.id;
    ex.topic = r.topic;
    ex.text = text.features(r);
    ex.comment_author = *ca;
    ex.reply_author = *ra;
    ex.gold = r.label;
    ex.token_count = whitespace_token_count(r.comment_text, r.reply_text);
    out.push_back(std::move(ex));
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " record(s) have no text vector:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw std::invalid_argument(msg);
  }
  return out;
}

ClassifierLoss training_loss(std::span<const LabeledExample> batch, const ClassifierParams& params,
                             const GaeParams& gae, const RelationGraph& graph, double lambda_recon,
                             bool finetune_encoder) {
  std::vector<QueryGraph> queries;
  queries.reserve(batch.size());
  std::vector<ExampleContext> ctx(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ctx[i].example = &batch[i];
    if (params.use_relations) queries.push_back(make_query_graph(graph, batch[i].comment_author, batch[i].reply_author));
  }
  for (std::size_t i = 0; i < queries.size(); ++i) ctx[i].query = &queries[i];
  return context_loss(ctx, params, gae, lambda_recon, finetune_encoder);
}

void ClassifierTrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(lambda_recon >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (use_relations && rel_out_dim == 0) throw std::invalid_argument("relation output dimension must be positive");
}

ClassifierTrainResult train_classifier(const std::vector<LabeledExample>& train,
                                       const std::vector<LabeledExample>& dev, const RelationGraph& graph,
                                       const GaeParams& gae, const ClassifierTrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("no training examples");
  const bool finetune = cfg.finetune_encoder && cfg.use_relations;

  ClassifierShape shape;
  shape.text_dim = train.front().text.size();
  shape.graph_dim = gae.dim();
  shape.rel_out_dim = cfg.rel_out_dim;
  shape.fusion = cfg.fusion;
  shape.use_relations = cfg.use_relations;

  ClassifierTrainResult res;
  res.params = init_classifier_params(shape, cfg.seed);
  res.gae = gae;
  if (cfg.epochs == 0) return res;

  QueryCache queries(graph);
  std::vector<ExampleContext> ctx(train.size());
  std::vector<Vector> train_means;
  if (cfg.use_relations && !finetune) train_means = graph_means(train, gae, queries);
  for (std::size_t i = 0; i < train.size(); ++i) {
    ctx[i].example = &train[i];
    if (!cfg.use_relations) continue;
    if (finetune) {
      ctx[i].query = &queries.get(train[i].comment_author, train[i].reply_author);
    } else {
      ctx[i].graph_mean = &train_means[i];
    }
  }
  std::vector<Vector> dev_means;
  if (cfg.use_relations && !finetune) dev_means = graph_means(dev, gae, queries);

  auto head_blocks = res.params.blocks();
  Adam head_opt({cfg.learning_rate}, head_blocks);
  std::optional<Adam> gae_opt;
  std::vector<std::span<double>> gae_blocks;
  if (finetune) {
    gae_blocks = res.gae.blocks();
    gae_opt.emplace(AdamConfig{cfg.learning_rate}, gae_blocks);
  }

  ClassifierParams best_params = res.params;
  GaeParams best_gae = res.gae;
  double best = -1.0;
  std::vector<std::size_t> order(train.size());
  std::vector<ExampleContext> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(cfg.seed, {kShuffleStream, epoch});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(ctx[order[i]]);
      auto loss = context_loss(batch, res.params, res.gae, cfg.lambda_recon, finetune);
      if (!std::isfinite(loss.total)) throw DivergenceError(epoch, "classifier");
      epoch_loss += loss.total * static_cast<double>(stop - start);
      head_opt.step(head_blocks, loss.grad.blocks());
      if (finetune) gae_opt->step(gae_blocks, loss.gae_grad->blocks());
    }
    res.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));

    double score = 0.0;
    if (!dev.empty()) {
      const auto preds = finetune ? predict_examples(dev, res.params, res.gae, graph)
                                  : predict_with_means(dev, res.params, dev_means);
      score = macro_f1_of(preds);
    }
    res.dev_macro_f1.push_back(score);
    // Without a dev set the last epoch wins.
    if (dev.empty() || score > best) {
      best = score;
      res.best_epoch = epoch;
      best_params = res.params;
      if (finetune) best_gae = res.gae;
    }
  }
  res.best_dev_macro_f1 = std::max(best, 0.0);
  res.params = std::move(best_params);
  res.gae = std::move(best_gae);
  return res;
}

ClassifierTrainResult train_classifier(const DatasetSplit& split, const RelationGraph& graph, const GaeParams& gae,
                                       const TextFeatureSource& text, const ClassifierTrainConfig& cfg) {
  return train_classifier(make_examples(split.train, graph, text), make_examples(split.dev, graph, text), graph, gae,
                          cfg);
}

std::vector<Prediction> predict_examples(std::span<const LabeledExample> examples, const ClassifierParams& params,
                                         const GaeParams& gae, const RelationGraph& graph) {
  std::vector<Vector> means;
  if (params.use_relations) {
    QueryCache queries(graph);
    means = graph_means(examples, gae, queries);
  } else {
    means.resize(examples.size());
  }
  return predict_with_means(examples, params, means);
}

double classifier_finite_diff_check(std::span<const LabeledExample> batch, const ClassifierParams& params,
                                    const GaeParams& gae, const RelationGraph& graph, double lambda_recon,
                                    bool finetune_encoder, std::size_t probe_count, double eps, std::uint64_t seed) {
  ClassifierParams head = params;
  GaeParams encoder = gae;
  const auto analytic = training_loss(batch, head, encoder, graph, lambda_recon, finetune_encoder);

  std::vector<std::span<double>> blocks = head.blocks();
  std::vector<std::span<const double>> grads;
  for (auto& g : analytic.grad.blocks()) grads.push_back(g);
  if (finetune_encoder) {
    for (auto b : encoder.blocks()) blocks.push_back(b);
    for (auto g : analytic.gae_grad->blocks()) grads.push_back(g);
  }
  Rng rng(seed);
  return max_relative_gradient_error(
      blocks, grads, [&] { return reference_classifier_loss(batch, head, encoder, graph, lambda_recon); },
      probe_count, eps, rng);
}

}  // namespace relstance
