#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "relstance/classifier.hpp"
#include "relstance/random.hpp"
#include "relstance/synth.hpp"

using namespace relstance;

namespace {

struct Fixture {
  DatasetSplit split;
  RelationGraph graph;
  GaeParams gae;
  std::vector<LabeledExample> train, dev;
};

Fixture small_fixture(std::size_t d = 6, std::size_t text = 8) {
  FusionSynthConfig cfg;
  cfg.records = 80;
  cfg.hubs = 9;
  cfg.commenters_per_hub = 3;
  cfg.seed = 5;
  Fixture f;
  f.split = temporal_split(fusion_dataset(cfg));
  f.graph = build_training_graph(f.split, Tau::per_edge(), 0.3, 1);
  f.gae = init_gae_params(f.graph.node_count(), d, DecoderKind::distmult, 2);
  const auto src = TextFeatureSource::hashing(text);
  f.train = make_examples(f.split.train, f.graph, src);
  f.dev = make_examples(f.split.dev, f.graph, src);
  return f;
}

Matrix identity(std::size_t d) {
  Matrix m(d, d);
  for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
  return m;
}

Vector random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (auto& x : v) x = rng.normal(0, scale);
  return v;
}

// Dense two-layer forward over an explicit edge list; nodes outside `keep` are dropped.
Matrix dense_encode(const GaeParams& p, const std::vector<Edge>& edges) {
  const std::size_t n = p.node_count(), d = p.dim();
  Matrix x = p.node_embeddings;
  for (int l = 0; l < 2; ++l) {
    Matrix out(n, d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        double v = 0;
        for (std::size_t c = 0; c < d; ++c) v += p.layers[l].self(k, c) * x(i, c);
        for (auto r : kAllRelations) {
          double s = 0;
          int cnt = 0;
          for (const auto& e : edges)
            if (e.dst == i && e.relation == r) {
              ++cnt;
              for (std::size_t c = 0; c < d; ++c) s += p.layers[l].relation[relation_index(r)](k, c) * x(e.src, c);
            }
          if (cnt) v += s / cnt;
        }
        out(i, k) = l == 0 ? std::max(0.0, v) : v;
      }
    x = out;
  }
  return x;
}

}  // namespace

TEST(Predict, ZeroWeightsGiveUniform) {
  ClassifierParams p = zeros_like(init_classifier_params({4, 3, 2, FusionMode::concat, true}, 1));
  const auto probs = predict(Vector{1, 2, 3, 4}, Vector{5, 6}, p);
  for (double v : probs) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Predict, SoftmaxPropertiesAndShiftInvariance) {
  Rng rng(1);
  for (auto mode : {FusionMode::concat, FusionMode::add}) {
    auto p = init_classifier_params({5, 4, 5, mode, true}, 3);
    for (int t = 0; t < 100; ++t) {
      const auto text = random_vector(rng, 5, 10), rel = random_vector(rng, 5, 10);
      const auto a = predict(text, rel, p);
      EXPECT_NEAR(a[0] + a[1] + a[2], 1.0, 1e-12);
      for (double v : a) EXPECT_GT(v, 0.0);
      auto q = p;
      const double c = rng.normal(0, 100);
      for (auto& b : q.fusion_bias) b += c;
      const auto b = predict(text, rel, q);
      for (int k = 0; k < 3; ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
    }
  }
}

TEST(Predict, ConcatAndAddDiffer) {
  // Same block in both halves of the concat head, so concat computes W(t) + W(r) with separate blocks
  // while add computes W(t + r); with distinct blocks the outputs differ on generic inputs.
  auto cat = zeros_like(init_classifier_params({3, 2, 3, FusionMode::concat, true}, 1));
  auto add = zeros_like(init_classifier_params({3, 2, 3, FusionMode::add, true}, 1));
  const double wt[3][3] = {{1, 0, 2}, {0, -1, 1}, {0.5, 0.5, 0}};
  const double wr[3][3] = {{0, 1, 0}, {2, 0, -1}, {1, 1, 1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      cat.fusion_weight(i, j) = wt[i][j];
      cat.fusion_weight(i, j + 3) = wr[i][j];
      add.fusion_weight(i, j) = wt[i][j];
    }
  const Vector t{0.3, -0.7, 1.1}, r{0.9, 0.2, -0.4};
  const auto pc = predict(t, r, cat), pa = predict(t, r, add);
  // Direct evaluation oracle.
  std::array<double, 3> zc{}, za{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      zc[i] += wt[i][j] * t[j] + wr[i][j] * r[j];
      za[i] += wt[i][j] * (t[j] + r[j]);
    }
  auto soft = [](std::array<double, 3> z) {
    const double m = std::max({z[0], z[1], z[2]});
    double s = 0;
    for (auto& v : z) s += (v = std::exp(v - m));
    for (auto& v : z) v /= s;
    return z;
  };
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(pc[k], soft(zc)[k], 1e-12);
    EXPECT_NEAR(pa[k], soft(za)[k], 1e-12);
  }
  EXPECT_GT(std::abs(pc[0] - pa[0]), 1e-3);
}

TEST(Predict, DimensionErrors) {
  EXPECT_THROW(init_classifier_params({4, 3, 2, FusionMode::add, true}, 1), std::invalid_argument);
  auto p = init_classifier_params({4, 3, 2, FusionMode::concat, true}, 1);
  EXPECT_THROW(predict(Vector(3), Vector(2), p), std::invalid_argument);
  EXPECT_THROW(predict(Vector(4), Vector(3), p), std::invalid_argument);
  auto text_only = init_classifier_params({4, 3, 2, FusionMode::concat, false}, 1);
  EXPECT_EQ(text_only.rel_proj.rows(), 0u);
  EXPECT_NO_THROW(predict(Vector(4), Vector{}, text_only));
}

TEST(RelationFeature, IsolatedPairIsMeanOfTwo) {
  RelationGraph g;
  for (auto n : {"a", "b", "c"}) g.add_node(n);
  g.add_edge({2, RelationType::supporter, 0});
  RelationGraph iso;
  iso.add_node("a");
  iso.add_node("b");
  const auto gae = init_gae_params(2, 4, DecoderKind::distmult, 3);
  const auto p = init_classifier_params({4, 4, 3, FusionMode::concat, true}, 1);
  const auto f = relation_feature(iso, gae, 0, 1, p);
  const Matrix h = dense_encode(gae, {});
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(f.graph_mean[k], (h(0, k) + h(1, k)) / 2, 1e-12);
}

TEST(RelationFeature, StarGraphMatchesDenseOracle) {
  RelationGraph g;
  for (auto n : {"a", "x", "y", "z", "b", "w"}) g.add_node(n);
  g.add_edge({1, RelationType::supporter, 0});
  g.add_edge({0, RelationType::opponent, 2});
  g.add_edge({3, RelationType::acquaintance, 0});
  g.add_edge({5, RelationType::supporter, 1});  // two hops from a: outside the subgraph
  g.add_edge({5, RelationType::opponent, 3});
  const auto gae = init_gae_params(6, 5, DecoderKind::hole, 4);
  const auto p = init_classifier_params({4, 5, 3, FusionMode::concat, true}, 2);
  const auto f = relation_feature(g, gae, 0, 4, p);

  std::vector<Edge> induced;
  for (const auto& e : g.edges())
    if (e.src != 5 && e.dst != 5) induced.push_back(e);
  const Matrix h = dense_encode(gae, induced);
  Vector mean(5, 0.0);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 5; ++k) mean[k] += h(i, k) / 5;
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(f.graph_mean[k], mean[k], 1e-12);

  Vector proj = p.rel_bias;
  gemv_add(p.rel_proj, mean, proj);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(f.projected[k], proj[k], 1e-12);

  auto zero = p;
  zero.rel_proj = Matrix(3, 5);
  zero.rel_bias.assign(3, 0.0);
  for (double v : relation_feature(g, gae, 0, 4, zero).projected) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(relation_feature(g, gae, 0, 42, p), std::exception);
}

TEST(Loss, UniformGivesLn3AndLambdaZeroIsStance) {
  auto f = small_fixture();
  auto p = init_classifier_params({8, 6, 4, FusionMode::concat, true}, 1);
  p.fusion_weight = Matrix(3, 12);
  std::span<const LabeledExample> batch(f.train.data(), 8);
  const auto l0 = training_loss(batch, p, f.gae, f.graph, 0.0);
  EXPECT_NEAR(l0.stance, std::log(3.0), 1e-12);
  EXPECT_EQ(l0.total, l0.stance);
  const auto l1 = training_loss(batch, p, f.gae, f.graph, 1.0);
  EXPECT_EQ(l1.stance, l0.stance);
  EXPECT_GE(l1.recon, 0.0);
  EXPECT_NEAR(l1.total, l1.stance + l1.recon, 1e-15);
  const auto l2 = training_loss(batch, p, f.gae, f.graph, 2.5);
  EXPECT_NEAR(l2.total, l2.stance + 2.5 * l2.recon, 1e-12);
  EXPECT_FALSE(l2.gae_grad.has_value());
  EXPECT_TRUE(training_loss(batch, p, f.gae, f.graph, 1.0, true).gae_grad.has_value());
}

TEST(Loss, PerfectPredictionsAndExactReconstructionNearZero) {
  auto f = small_fixture();
  auto p = init_classifier_params({8, 6, 6, FusionMode::concat, true}, 1);
  p.rel_proj = identity(6);
  p.rel_bias.assign(6, 0.0);
  p.recon = identity(6);
  p.recon_bias.assign(6, 0.0);
  // One example per batch; the bias alone makes its gold class dominate.
  const LabeledExample& ex = f.train[0];
  p.fusion_weight = Matrix(3, 14);
  p.fusion_bias.assign(3, -60.0);
  p.fusion_bias[class_index(ex.gold)] = 60.0;
  const auto l = training_loss(std::span<const LabeledExample>(&ex, 1), p, f.gae, f.graph, 1.0);
  EXPECT_LT(l.stance, 1e-40);
  EXPECT_LT(l.recon, 1e-28);
}

TEST(Loss, ReconIsNonNegativeOnRandomParams) {
  auto f = small_fixture();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto p = init_classifier_params({8, 6, 4, FusionMode::concat, true}, s);
    EXPECT_GE(training_loss(f.train, p, f.gae, f.graph, 1.0).recon, 0.0);
  }
}

TEST(Gradient, FiniteDifferenceAllModes) {
  auto f = small_fixture(6, 8);
  std::span<const LabeledExample> batch(f.train.data(), 6);
  for (auto mode : {FusionMode::concat, FusionMode::add}) {
    const auto p = init_classifier_params({8, 6, 8, mode, true}, 4);
    for (bool ft : {false, true}) {
      EXPECT_LT(classifier_finite_diff_check(batch, p, f.gae, f.graph, 1.0, ft, 100, 1e-5), 1e-5)
          << to_string(mode) << " finetune=" << ft;
    }
  }
  const auto text_only = init_classifier_params({8, 6, 8, FusionMode::concat, false}, 4);
  EXPECT_LT(classifier_finite_diff_check(batch, text_only, f.gae, f.graph, 1.0, false, 50, 1e-5), 1e-5);
}

TEST(Training, ZeroEpochsReturnsInit) {
  auto f = small_fixture();
  ClassifierTrainConfig cfg;
  cfg.epochs = 0;
  cfg.rel_out_dim = 4;
  const auto r = train_classifier(f.train, f.dev, f.graph, f.gae, cfg);
  EXPECT_EQ(r.params, init_classifier_params({8, 6, 4, FusionMode::concat, true}, cfg.seed));
  EXPECT_EQ(r.best_epoch, 0u);
}

TEST(Training, SameSeedSameTrajectoryAndFrozenEncoder) {
  auto f = small_fixture();
  ClassifierTrainConfig cfg;
  cfg.epochs = 5;
  cfg.rel_out_dim = 4;
  const auto a = train_classifier(f.train, f.dev, f.graph, f.gae, cfg);
  const auto b = train_classifier(f.train, f.dev, f.graph, f.gae, cfg);
  EXPECT_EQ(a.dev_macro_f1, b.dev_macro_f1);
  EXPECT_EQ(a.train_loss, b.train_loss);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.gae, f.gae);
  ASSERT_EQ(a.dev_macro_f1.size(), 5u);
  EXPECT_EQ(a.best_dev_macro_f1, *std::max_element(a.dev_macro_f1.begin(), a.dev_macro_f1.end()));
  EXPECT_EQ(a.dev_macro_f1[a.best_epoch - 1], a.best_dev_macro_f1);

  cfg.finetune_encoder = true;
  const auto c = train_classifier(f.train, f.dev, f.graph, f.gae, cfg);
  EXPECT_NE(c.gae, f.gae);
}

TEST(Training, LossDecreases) {
  auto f = small_fixture();
  ClassifierTrainConfig cfg;
  cfg.epochs = 20;
  cfg.rel_out_dim = 4;
  cfg.learning_rate = 1e-2;
  const auto r = train_classifier(f.train, f.dev, f.graph, f.gae, cfg);
  EXPECT_LT(r.train_loss.back(), r.train_loss.front());
}

TEST(Examples, MissingTextIdsAreListed) {
  auto f = small_fixture();
  EmbeddingTable table(8);
  table.add(f.split.train[0].id, std::vector<float>(8, 0.1f));
  try {
    make_examples(f.split.train, f.graph, TextFeatureSource::table(table));
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(f.split.train[1].id), std::string::npos);
    EXPECT_NE(msg.find(f.split.train[2].id), std::string::npos);
    EXPECT_EQ(msg.find(" " + f.split.train[0].id + " "), std::string::npos);
  }
}

TEST(Examples, TokenCountsAndAuthors) {
  auto f = small_fixture();
  const auto& r = f.split.train[3];
  const auto& ex = f.train[3];
  EXPECT_EQ(ex.id, r.id);
  EXPECT_EQ(ex.token_count, whitespace_token_count(r.comment_text, r.reply_text));
  EXPECT_EQ(f.graph.nodes()[ex.reply_author], r.reply_author);
  EXPECT_EQ(ex.gold, r.label);
}

TEST(Config, Validation) {
  ClassifierTrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.lambda_recon = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_EQ(parse_fusion("add"), FusionMode::add);
  EXPECT_FALSE(parse_fusion("mul").has_value());
}
