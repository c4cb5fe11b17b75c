#include <gtest/gtest.h>

#include <cmath>

#include "relstance/autoenc.hpp"
#include "relstance/random.hpp"
#include "relstance/reference.hpp"
#include "relstance/synth.hpp"

using namespace relstance;

namespace {

Matrix identity(std::size_t d) {
  Matrix m(d, d);
  for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
  return m;
}

GaeParams blank(std::size_t nodes, std::size_t d, DecoderKind k = DecoderKind::distmult) {
  GaeParams p = init_gae_params(nodes, d, k, 1);
  return zeros_like(p);
}

RelationGraph random_graph(std::size_t n, std::size_t edges, std::uint64_t seed, std::size_t relations = 4) {
  RelationGraph g;
  for (std::size_t i = 0; i < n; ++i) g.add_node("n" + std::to_string(i));
  Rng rng(seed);
  while (g.edge_count() < edges) {
    const auto s = static_cast<NodeIndex>(rng.index(n));
    const auto d = static_cast<NodeIndex>(rng.index(n));
    if (s == d || g.has_edge(s, d)) continue;
    g.add_edge({s, kAllRelations[rng.index(relations)], d});
  }
  return g;
}

// Dense loops over the edge list: h_i = W0 x_i + Σ_r (1/|N_i^r|) Σ_j W_r x_j.
Matrix dense_layer(const RgcnLayer& layer, const std::vector<Edge>& edges, const Matrix& x, bool relu) {
  const std::size_t n = x.rows(), d = x.cols();
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      double v = 0;
      for (std::size_t c = 0; c < d; ++c) v += layer.self(k, c) * x(i, c);
      for (auto r : kAllRelations) {
        double sum = 0;
        int count = 0;
        for (const auto& e : edges) {
          if (e.dst != i || e.relation != r) continue;
          ++count;
          for (std::size_t c = 0; c < d; ++c) sum += layer.relation[relation_index(r)](k, c) * x(e.src, c);
        }
        if (count) v += sum / count;
      }
      out(i, k) = relu ? std::max(0.0, v) : v;
    }
  }
  return out;
}

}  // namespace

TEST(Encoder, IsolatedNodeIdentityWeights) {
  GaeParams p = blank(1, 2);
  p.layers[0].self = identity(2);
  p.layers[1].self = identity(2);
  p.node_embeddings(0, 0) = 1.0;
  p.node_embeddings(0, 1) = -1.0;
  const MessageGraph mg(1, {});
  const Matrix h = encode_nodes(p, mg);
  EXPECT_EQ(h(0, 0), 1.0);
  EXPECT_EQ(h(0, 1), 0.0);
}

TEST(Encoder, ZeroInputZeroSelfGivesZero) {
  GaeParams p = init_gae_params(5, 4, DecoderKind::distmult, 3);
  for (auto& x : p.node_embeddings.values()) x = 0.0;
  for (auto& l : p.layers) l.self = Matrix(4, 4);
  const auto g = random_graph(5, 8, 2);
  const Matrix h = encode_nodes(p, MessageGraph(5, g.edges()));
  for (double v : h.values()) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, TwoNodeSupporterMatchesDenseOracle) {
  GaeParams p = blank(2, 2);
  p.node_embeddings = Matrix(2, 2);
  p.node_embeddings(0, 0) = 0.5;
  p.node_embeddings(0, 1) = -1.5;
  p.node_embeddings(1, 0) = 2.0;
  p.node_embeddings(1, 1) = 0.25;
  const double w[4][4] = {{1, 0.5, -0.3, 2}, {0.2, -1, 0.7, 0.4}, {-0.6, 1.1, 0.3, 0.9}, {0.8, 0.1, -1.2, 0.5}};
  for (int l = 0; l < 2; ++l) {
    for (int k = 0; k < 4; ++k) {
      p.layers[l].self.values()[k] = w[l][k];
      p.layers[l].relation[0].values()[k] = w[l + 2][k];
    }
  }
  const std::vector<Edge> edges{{0, RelationType::supporter, 1}};
  const Matrix h = encode_nodes(p, MessageGraph(2, edges));
  const Matrix oracle = dense_layer(p.layers[1], edges, dense_layer(p.layers[0], edges, p.node_embeddings, true), false);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(h.values()[k], oracle.values()[k], 1e-12);
}

TEST(Encoder, RandomGraphMatchesDenseOracleAndReference) {
  const auto g = random_graph(15, 40, 5);
  const GaeParams p = init_gae_params(15, 6, DecoderKind::hole, 8);
  const Matrix h = encode_nodes(p, MessageGraph(15, g.edges()));
  const Matrix oracle =
      dense_layer(p.layers[1], g.edges(), dense_layer(p.layers[0], g.edges(), p.node_embeddings, true), false);
  const auto ref = reference_encode(p, g.edges(), p.node_embeddings);
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t k = 0; k < 6; ++k) {
      EXPECT_NEAR(h(i, k), oracle(i, k), 1e-12);
      EXPECT_NEAR(h(i, k), static_cast<double>(ref[i][k]), 1e-12);
    }
}

TEST(Encoder, DimensionMismatchThrows) {
  const GaeParams p = init_gae_params(3, 4, DecoderKind::distmult, 1);
  EXPECT_THROW(encode(p, MessageGraph(3, {}), Matrix(3, 5)), std::invalid_argument);
}

TEST(Decoder, DistMultExample) {
  GaeParams p = blank(1, 2);
  p.relation_vectors[0] = {0.5, 0.25};
  const Vector s{1, 2}, d{2, 1};
  EXPECT_DOUBLE_EQ(raw_score(p, s, RelationType::supporter, d), 1.5);
  EXPECT_NEAR(logistic(raw_score(p, s, RelationType::supporter, d)), 0.817574, 1e-6);
  EXPECT_DOUBLE_EQ(raw_score(p, d, RelationType::supporter, s), 1.5);
}

TEST(Decoder, TransEZeroDistance) {
  GaeParams p = blank(1, 3, DecoderKind::transe);
  p.transe_margin = 2.0;
  p.relation_vectors[1] = {0.5, -1, 2};
  const Vector s{1, 1, 1}, d{1.5, 0, 3};
  EXPECT_DOUBLE_EQ(logistic(raw_score(p, s, RelationType::opponent, d)), logistic(2.0));
  EXPECT_LT(raw_score(p, d, RelationType::opponent, s), 2.0);
}

TEST(Decoder, HolEMatchesCircularCorrelationDefinition) {
  GaeParams p = blank(1, 1, DecoderKind::hole);
  p.relation_vectors[2] = {0.5};
  EXPECT_NEAR(logistic(raw_score(p, Vector{2}, RelationType::acquaintance, Vector{3})), 0.952574, 1e-6);

  GaeParams q = blank(1, 4, DecoderKind::hole);
  q.relation_vectors[0] = {0.3, -0.2, 0.9, 0.1};
  const Vector s{1, 2, -1, 0.5}, d{0.2, -0.4, 1.5, 3};
  double want = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    double corr = 0;
    for (std::size_t i = 0; i < 4; ++i) corr += s[i] * d[(i + k) % 4];
    want += q.relation_vectors[0][k] * corr;
  }
  EXPECT_NEAR(raw_score(q, s, RelationType::supporter, d), want, 1e-12);
  EXPECT_NE(raw_score(q, s, RelationType::supporter, d), raw_score(q, d, RelationType::supporter, s));
}

TEST(Decoder, ScoresStayInOpenUnitIntervalAndReferenceAgrees) {
  Rng rng(5);
  for (auto kind : {DecoderKind::distmult, DecoderKind::transe, DecoderKind::hole}) {
    const GaeParams p = init_gae_params(1, 5, kind, 9);
    for (int t = 0; t < 200; ++t) {
      Vector s(5), d(5);
      for (auto& x : s) x = rng.normal(0, 1);
      for (auto& x : d) x = rng.normal(0, 1);
      const auto r = kAllRelations[rng.index(4)];
      const double raw = raw_score(p, s, r, d);
      const double sc = logistic(raw);
      ASSERT_GT(sc, 0.0);
      ASSERT_LT(sc, 1.0);
      std::vector<long double> ls(s.begin(), s.end()), ld(d.begin(), d.end());
      ASSERT_NEAR(raw, static_cast<double>(reference_raw_score(p, ls, r, ld)), 1e-12);
      if (kind == DecoderKind::distmult) ASSERT_EQ(raw, raw_score(p, d, r, s));
    }
  }
}

TEST(Triplets, OneTrueEdgeGivesTwoTriplets) {
  RelationGraph g;
  g.add_node("a");
  g.add_node("b");
  g.add_node("c");
  g.add_edge({0, RelationType::supporter, 1});
  GaeTrainConfig cfg;
  const auto u = build_training_triplets(g, cfg, 0);
  ASSERT_EQ(u.size(), 2u);
  EXPECT_EQ(std::count_if(u.begin(), u.end(), [](const Triplet& t) { return t.truth; }), 1);
  EXPECT_FALSE(g.contains({u[1].src, u[1].relation, u[1].dst}));
}

TEST(Triplets, NegativesAreNotGraphTripletsAndSeedDeterministic) {
  const auto g = random_graph(30, 120, 4);
  GaeTrainConfig cfg;
  cfg.seed = 3;
  const auto u = build_training_triplets(g, cfg, 5);
  EXPECT_EQ(u.size(), 2 * sample_kept_edges(g, cfg).size());
  for (const auto& t : u) {
    if (t.truth) EXPECT_TRUE(g.contains({t.src, t.relation, t.dst}));
    else EXPECT_FALSE(g.contains({t.src, t.relation, t.dst}));
  }
  EXPECT_EQ(u, build_training_triplets(g, cfg, 5));
  EXPECT_NE(u, build_training_triplets(g, cfg, 6));
  EXPECT_EQ(sample_kept_edges(g, cfg).size(), 60u);
}

TEST(Triplets, NoSupervisionEdgesThrows) {
  RelationGraph g;
  g.add_node("a");
  EXPECT_THROW(build_training_triplets(g, GaeTrainConfig{}, 0), std::invalid_argument);
}

TEST(Loss, HandExpansion) {
  const std::vector<Triplet> u{{0, RelationType::supporter, 1, true}, {1, RelationType::supporter, 0, false}};
  EXPECT_NEAR(gae_loss(std::vector<double>{0.5, 0.5}, u), std::log(2.0), 1e-12);
  EXPECT_LE(gae_loss(std::vector<double>{1.0, 0.0}, u), 2.8e-11);
  EXPECT_NEAR(gae_loss_from_logits(std::vector<double>{0.0, 0.0}, u), std::log(2.0), 1e-15);
  EXPECT_THROW(gae_loss(std::vector<double>{}, std::vector<Triplet>{}), std::invalid_argument);
}

TEST(Loss, LogitFormMatchesScoreForm) {
  Rng rng(6);
  std::vector<Triplet> u;
  std::vector<double> logits, scores;
  for (int i = 0; i < 100; ++i) {
    u.push_back({0, RelationType::supporter, 1, i % 2 == 0});
    logits.push_back(rng.normal(0, 5));
    scores.push_back(logistic(logits.back()));
  }
  EXPECT_NEAR(gae_loss_from_logits(logits, u), gae_loss(scores, u), 1e-9);
  EXPECT_NEAR(log_sigmoid(-800.0), -800.0, 1e-9);
  EXPECT_NEAR(log_sigmoid(40.0), -std::exp(-40.0), 1e-25);
}

TEST(Loss, ObjectiveMatchesReference) {
  const auto g = random_graph(12, 30, 7);
  for (auto kind : {DecoderKind::distmult, DecoderKind::transe, DecoderKind::hole}) {
    const GaeParams p = init_gae_params(12, 5, kind, 2);
    const auto u = build_training_triplets(g, GaeTrainConfig{}, 0);
    const double prod = gae_objective(p, MessageGraph(12, g.edges()), u, false).loss;
    EXPECT_NEAR(prod, static_cast<double>(reference_gae_loss(p, g.edges(), u)), 1e-12);
  }
}

TEST(Gradient, FiniteDifferenceAllDecoders) {
  const auto g = random_graph(12, 30, 11);
  for (auto kind : {DecoderKind::distmult, DecoderKind::transe, DecoderKind::hole}) {
    const GaeParams p = init_gae_params(12, 8, kind, 4);
    EXPECT_LT(finite_diff_check(p, g, 100, 1e-5), 1e-5) << to_string(kind);
  }
}

TEST(Gradient, AbsentRelationBlocksAreExactlyZero) {
  const auto g = random_graph(12, 30, 12, 2);  // supporter and opponent only
  GaeParams p = zeros_like(init_gae_params(12, 4, DecoderKind::distmult, 1));
  const auto u = build_training_triplets(g, GaeTrainConfig{}, 0);
  auto obj = gae_objective(p, MessageGraph(12, g.edges()), u);
  for (const auto& layer : obj.grad.layers)
    for (auto r : {RelationType::acquaintance, RelationType::interaction})
      for (double v : layer.relation[relation_index(r)].values()) EXPECT_EQ(v, 0.0);

  // Random parameters too: absent relations never receive messages.
  p = init_gae_params(12, 4, DecoderKind::distmult, 1);
  obj = gae_objective(p, MessageGraph(12, g.edges()), u);
  for (const auto& layer : obj.grad.layers)
    for (double v : layer.relation[relation_index(RelationType::interaction)].values()) EXPECT_EQ(v, 0.0);
}

TEST(Training, ZeroEpochsReturnsInit) {
  const auto g = random_graph(10, 20, 1);
  GaeTrainConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 0;
  const auto init = init_gae_params(10, 4, cfg.decoder, 99);
  EXPECT_EQ(train_gae(g, cfg, init).params, init);
}

TEST(Training, LossDecreasesAndRunsAreReproducible) {
  const auto g = two_community_graph(10);
  GaeTrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 200;
  const auto a = train_gae(g, cfg);
  ASSERT_EQ(a.loss_history.size(), 200u);
  EXPECT_LT(a.loss_history.back(), a.loss_history.front());
  EXPECT_LT(a.final_loss, a.loss_history.front());
  const auto b = train_gae(g, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(Training, ObserverStopsEarly) {
  const auto g = two_community_graph(5);
  GaeTrainConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 100;
  std::size_t calls = 0;
  const auto r = train_gae(g, cfg, init_gae_params(g.node_count(), 4, cfg.decoder, cfg.seed),
                           [&](std::size_t epoch, const GaeParams&) {
                             ++calls;
                             return epoch < 7;
                           });
  EXPECT_EQ(calls, 7u);
  EXPECT_EQ(r.loss_history.size(), 7u);
}

TEST(Training, ConfigValidation) {
  GaeTrainConfig cfg;
  cfg.learning_rate = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.edge_keep_fraction = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.dim = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(MessagePassingMode, KeptPlusInteraction) {
  RelationGraph g;
  for (auto n : {"a", "b", "c", "d"}) g.add_node(n);
  g.add_edge({0, RelationType::supporter, 1});
  g.add_edge({1, RelationType::opponent, 2});
  g.add_edge({2, RelationType::interaction, 3});
  const std::vector<Edge> kept{{0, RelationType::supporter, 1}};
  EXPECT_EQ(message_edges_for(g, kept, MessagePassing::kept_plus_interaction).size(), 2u);
  EXPECT_EQ(message_edges_for(g, kept, MessagePassing::all_edges).size(), 3u);
}
