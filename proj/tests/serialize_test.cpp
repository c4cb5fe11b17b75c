#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "relstance/errors.hpp"
#include "relstance/protocol.hpp"
#include "relstance/serialize.hpp"
#include "relstance/synth.hpp"

using namespace relstance;

namespace {

RelationGraph sample_graph() {
  FusionSynthConfig s;
  s.records = 120;
  s.hubs = 10;
  s.commenters_per_hub = 3;
  const auto split = temporal_split(fusion_dataset(s));
  return build_training_graph(split, Tau::seconds(600), 0.3, 4);
}

// Values that stress shortest-repr printing.
void perturb(std::span<double> v) {
  const double odd[] = {0.1, 1.0 / 3.0, -2.2250738585072014e-308, 5e-324, 1e300, -0.0, 123456789.123456789};
  for (std::size_t i = 0; i < v.size() && i < 7; ++i) v[i] = odd[i];
}

void expect_bitwise(const Json& a, const Json& b) { EXPECT_EQ(a.dump(), b.dump()); }

}  // namespace

TEST(Serialize, GraphRoundTrip) {
  const auto g = sample_graph();
  ASSERT_FALSE(g.retyped().empty());
  const auto back = graph_from_json(graph_to_json(g));
  EXPECT_EQ(back.nodes(), g.nodes());
  EXPECT_EQ(back.edges(), g.edges());
  EXPECT_EQ(back.aggregate_weights(), g.aggregate_weights());
  EXPECT_EQ(back.retyped(), g.retyped());
  EXPECT_EQ(back.meta.tau, g.meta.tau);
  EXPECT_EQ(back.meta.rho, g.meta.rho);
  EXPECT_EQ(back.meta.seed, g.meta.seed);
  expect_bitwise(graph_to_json(back), graph_to_json(g));
}

TEST(Serialize, GaeRoundTripIsBitExact) {
  const auto g = sample_graph();
  for (auto kind : {DecoderKind::distmult, DecoderKind::transe, DecoderKind::hole}) {
    GaeCheckpoint ck{init_gae_params(g.node_count(), 5, kind, 3, 1.75), g.nodes(), 3};
    perturb(ck.params.node_embeddings.values());
    perturb(ck.params.layers[1].relation[2].values());
    const auto text = gae_to_json(ck).dump();
    const auto back = gae_from_json(Json::parse(text));
    EXPECT_EQ(back, ck);
    EXPECT_TRUE(std::signbit(back.params.node_embeddings.values()[5]));
    EXPECT_NO_THROW(check_node_map(back.nodes, g));
  }
}

TEST(Serialize, GaeRejectsBadDocuments) {
  const auto g = sample_graph();
  GaeCheckpoint ck{init_gae_params(g.node_count(), 3, DecoderKind::distmult, 1), g.nodes(), 1};
  auto doc = gae_to_json(ck);
  auto bad = doc;
  bad["section"] = "classifier";
  EXPECT_THROW(gae_from_json(bad), ParseError);
  bad = doc;
  bad["version"] = 99;
  EXPECT_THROW(gae_from_json(bad), ParseError);
  bad = doc;
  bad["node_embeddings"][0].erase(0);
  EXPECT_THROW(gae_from_json(bad), ParseError);
  auto nodes = g.nodes();
  std::swap(nodes[0], nodes[1]);
  EXPECT_THROW(check_node_map(nodes, g), std::invalid_argument);
}

TEST(Serialize, ClassifierRoundTrip) {
  const auto g = sample_graph();
  for (auto mode : {FusionMode::concat, FusionMode::add}) {
    for (bool rel : {true, false}) {
      ClassifierCheckpoint ck{init_classifier_params({6, 4, 6, mode, rel}, 2),
                              {init_gae_params(g.node_count(), 4, DecoderKind::hole, 1), g.nodes(), 1}};
      perturb(ck.params.fusion_weight.values());
      const auto back = classifier_from_json(Json::parse(classifier_to_json(ck).dump()));
      EXPECT_EQ(back, ck);
    }
  }
}

TEST(Serialize, ReportsRoundTrip) {
  FusionSynthConfig s;
  s.records = 200;
  s.hubs = 20;
  s.topics = 3;
  PipelineConfig cfg;
  cfg.gae.dim = 4;
  cfg.gae.epochs = 5;
  cfg.classifier.epochs = 2;
  cfg.classifier.rel_out_dim = 4;
  const auto rep =
      run_protocol(fusion_dataset(s), ProtocolMode::cross_domain, TextFeatureSource::hashing(8), cfg, {1, 2});
  const auto back = protocol_report_from_json(Json::parse(protocol_report_to_json(rep).dump()));
  EXPECT_EQ(back, rep);
  const auto one = run_report_from_json(run_report_to_json(rep.runs[0]));
  EXPECT_EQ(one, rep.runs[0]);

  std::ostringstream csv;
  write_aggregate_csv(csv, rep);
  std::istringstream lines(csv.str());
  std::string header, line;
  std::getline(lines, header);
  EXPECT_EQ(header.rfind("mode,topic,seed,acc,macro_f1,agree_p,", 0), 0u);
  std::size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 3u * 2u + 2u);  // per topic per seed, plus one average per seed
}

TEST(Serialize, PredictionsRoundTrip) {
  std::vector<Prediction> preds{{"a", Stance::agree, Stance::neutral, {0.1, 0.2, 0.7}},
                                {"b\"q", Stance::disagree, Stance::disagree, {1.0 / 3.0, 1e-300, 1 - 1.0 / 3.0}}};
  std::stringstream buf;
  write_predictions(buf, preds);
  const auto back = read_predictions(buf);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].id, preds[i].id);
    EXPECT_EQ(back[i].gold, preds[i].gold);
    EXPECT_EQ(back[i].pred, preds[i].pred);
    EXPECT_EQ(back[i].probs, preds[i].probs);
  }
}

TEST(Serialize, JsonFileHelpers) {
  const auto path = std::filesystem::temp_directory_path() / "relstance_serialize_test.json";
  Json doc = {{"x", 0.1}, {"y", {1, 2, 3}}};
  write_json_file(path, doc, -1);
  EXPECT_EQ(read_json_file(path), doc);
  std::filesystem::remove(path);
  EXPECT_THROW(read_json_file(path), std::exception);
}
