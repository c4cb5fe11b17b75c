#include "relstance/serialize.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "relstance/errors.hpp"

namespace relstance {

namespace {

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(Json(std::vector<double>(row.begin(), row.end())));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, std::size_t rows, std::size_t cols, const std::string& what) {
  if (!j.is_array() || j.size() != rows) throw ParseError(0, what + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ParseError(0, what + ": row " + std::to_string(r) + " should have " + std::to_string(cols) + " values");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

// Row count is read from the document; used where the shape is not known upfront.
Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(0, what + ": expected an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j[0].size();
  return matrix_from_json(j, rows, cols, what);
}

Vector vector_from_json(const Json& j, std::size_t n, const std::string& what) {
  if (!j.is_array() || j.size() != n) throw ParseError(0, what + ": expected " + std::to_string(n) + " values");
  return j.get<Vector>();
}

void expect_section(const Json& doc, const std::string& section) {
  if (!doc.is_object()) throw ParseError(0, "expected a JSON object");
  if (doc.value("section", std::string{}) != section)
    throw ParseError(0, "expected a '" + section + "' document");
  if (doc.value("version", 0) != kFormatVersion)
    throw ParseError(0, "unsupported " + section + " format version");
}

template <typename T>
T field(const Json& doc, const char* key) {
  if (!doc.contains(key)) throw ParseError(0, std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("field '") + key + "': " + e.what());
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

Stance stance_field(const Json& doc, const char* key) {
  const auto s = parse_stance(field<std::string>(doc, key));
  if (!s) throw ParseError(0, std::string("field '") + key + "' is not a stance label");
  return *s;
}

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& doc, int indent) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(indent) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Json graph_to_json(const RelationGraph& graph) {
  Json doc;
  doc["version"] = kFormatVersion;
  doc["section"] = "graph";
  doc["nodes"] = graph.nodes();
  Json edges = Json::array();
  for (const auto& e : graph.edges())
    edges.push_back(Json::array({graph.nodes()[e.src], to_string(e.relation), graph.nodes()[e.dst]}));
  doc["edges"] = std::move(edges);
  Json weights = Json::array();
  for (const auto& [pair, w] : graph.aggregate_weights())
    weights.push_back(Json::array({graph.nodes()[pair.first], graph.nodes()[pair.second], w}));
  doc["aggregate_weights"] = std::move(weights);
  Json retyped = Json::array();
  for (const auto& [idx, original] : graph.retyped()) retyped.push_back(Json::array({idx, to_string(original)}));
  doc["meta"] = {{"tau", graph.meta.tau.to_string()},
                 {"rho", graph.meta.rho},
                 {"seed", graph.meta.seed},
                 {"retyped", std::move(retyped)}};
  return doc;
}

RelationGraph graph_from_json(const Json& doc) {
  expect_section(doc, "graph");
  RelationGraph g;
  try {
    for (const auto& name : field<std::vector<std::string>>(doc, "nodes")) {
      if (g.find_node(name)) throw ParseError(0, "duplicate node " + name);
      g.add_node(name);
    }
    const auto& edges = doc.at("edges");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& e = edges[i];
      if (!e.is_array() || e.size() != 3) throw ParseError(i + 1, "edge must be [src, relation, dst]");
      const auto rel = parse_relation(e[1].get<std::string>());
      if (!rel) throw ParseError(i + 1, "unknown relation " + e[1].get<std::string>());
      g.add_edge({g.node(e[0].get<std::string>()), *rel, g.node(e[2].get<std::string>())});
    }
    for (const auto& w : doc.at("aggregate_weights")) {
      if (!w.is_array() || w.size() != 3) throw ParseError(0, "aggregate weight must be [src, dst, w]");
      g.set_aggregate_weight(g.node(w[0].get<std::string>()), g.node(w[1].get<std::string>()), w[2].get<int>());
    }
    const auto& meta = doc.at("meta");
    g.meta.tau = Tau::parse(meta.at("tau").get<std::string>());
    g.meta.rho = meta.at("rho").get<double>();
    g.meta.seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& r : meta.at("retyped")) {
      const auto idx = r.at(0).get<std::size_t>();
      const auto rel = parse_relation(r.at(1).get<std::string>());
      if (!rel || idx >= g.edge_count()) throw ParseError(0, "bad retyped entry");
      g.mark_retyped(idx, *rel);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("graph: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw ParseError(0, std::string("graph: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(0, std::string("graph: ") + e.what());
  }
  return g;
}

Json gae_to_json(const GaeCheckpoint& ckpt) {
  const auto& p = ckpt.params;
  Json doc;
  doc["version"] = kFormatVersion;
  doc["section"] = "gae";
  doc["d"] = p.dim();
  doc["decoder_kind"] = to_string(p.decoder);
  doc["transe_margin"] = p.transe_margin;
  Json names = Json::array();
  for (auto r : kAllRelations) names.push_back(to_string(r));
  doc["relation_names"] = std::move(names);
  doc["node_index_map"] = ckpt.nodes;
  doc["rng_seed"] = ckpt.rng_seed;
  doc["node_embeddings"] = matrix_to_json(p.node_embeddings);
  Json layers = Json::array();
  for (const auto& layer : p.layers) {
    Json rel = Json::array();
    for (const auto& w : layer.relation) rel.push_back(matrix_to_json(w));
    layers.push_back({{"self", matrix_to_json(layer.self)}, {"relation", std::move(rel)}});
  }
  doc["layers"] = std::move(layers);
  Json vecs = Json::array();
  for (const auto& v : p.relation_vectors) vecs.push_back(Json(v));
  doc["relation_vectors"] = std::move(vecs);
  return doc;
}

GaeCheckpoint gae_from_json(const Json& doc) {
  expect_section(doc, "gae");
  GaeCheckpoint ck;
  try {
    const auto d = field<std::size_t>(doc, "d");
    const auto decoder = parse_decoder(field<std::string>(doc, "decoder_kind"));
    if (!decoder) throw ParseError(0, "unknown decoder_kind");
    const auto names = field<std::vector<std::string>>(doc, "relation_names");
    if (names.size() != kRelationCount) throw ParseError(0, "relation_names must list four relations");
    for (std::size_t r = 0; r < kRelationCount; ++r)
      if (names[r] != to_string(kAllRelations[r])) throw ParseError(0, "relation_names out of order");
    ck.nodes = field<std::vector<std::string>>(doc, "node_index_map");
    ck.rng_seed = field<std::uint64_t>(doc, "rng_seed");
    auto& p = ck.params;
    p.decoder = *decoder;
    p.transe_margin = field<double>(doc, "transe_margin");
    p.node_embeddings = matrix_from_json(doc.at("node_embeddings"), ck.nodes.size(), d, "node_embeddings");
    const auto& layers = doc.at("layers");
    if (!layers.is_array() || layers.size() != p.layers.size()) throw ParseError(0, "expected two layers");
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      p.layers[l].self = matrix_from_json(layers[l].at("self"), d, d, "layer self weight");
      const auto& rel = layers[l].at("relation");
      if (!rel.is_array() || rel.size() != kRelationCount) throw ParseError(0, "expected four relation weights");
      for (std::size_t r = 0; r < kRelationCount; ++r)
        p.layers[l].relation[r] = matrix_from_json(rel[r], d, d, "layer relation weight");
    }
    const auto& vecs = doc.at("relation_vectors");
    if (!vecs.is_array() || vecs.size() != kRelationCount) throw ParseError(0, "expected four relation vectors");
    for (std::size_t r = 0; r < kRelationCount; ++r) p.relation_vectors[r] = vector_from_json(vecs[r], d, "relation vector");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("gae checkpoint: ") + e.what());
  }
  return ck;
}

Json classifier_to_json(const ClassifierCheckpoint& ckpt) {
  const auto& p = ckpt.params;
  Json doc;
  doc["version"] = kFormatVersion;
  doc["section"] = "classifier";
  doc["fusion_mode"] = to_string(p.fusion);
  doc["use_relations"] = p.use_relations;
  doc["text_dim"] = p.text_dim();
  doc["rel_proj"] = matrix_to_json(p.rel_proj);
  doc["rel_bias"] = p.rel_bias;
  doc["recon"] = matrix_to_json(p.recon);
  doc["recon_bias"] = p.recon_bias;
  doc["fusion_weight"] = matrix_to_json(p.fusion_weight);
  doc["fusion_bias"] = p.fusion_bias;
  doc["gae"] = gae_to_json(ckpt.gae);
  return doc;
}

ClassifierCheckpoint classifier_from_json(const Json& doc) {
  expect_section(doc, "classifier");
  ClassifierCheckpoint ck;
  try {
    auto& p = ck.params;
    const auto fusion = parse_fusion(field<std::string>(doc, "fusion_mode"));
    if (!fusion) throw ParseError(0, "unknown fusion_mode");
    p.fusion = *fusion;
    p.use_relations = field<bool>(doc, "use_relations");
    p.rel_proj = matrix_from_json(doc.at("rel_proj"), "rel_proj");
    p.rel_bias = doc.at("rel_bias").get<Vector>();
    p.recon = matrix_from_json(doc.at("recon"), "recon");
    p.recon_bias = doc.at("recon_bias").get<Vector>();
    p.fusion_weight = matrix_from_json(doc.at("fusion_weight"), "fusion_weight");
    p.fusion_bias = doc.at("fusion_bias").get<Vector>();
    // Empty relation blocks of a text-only head serialize as [] and come back 0×0.
    p.validate();
    ck.gae = gae_from_json(doc.at("gae"));
    if (p.use_relations && p.graph_dim() != ck.gae.params.dim())
      throw ParseError(0, "classifier and encoder widths differ");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("classifier checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(0, std::string("classifier checkpoint: ") + e.what());
  }
  return ck;
}

void check_node_map(const std::vector<std::string>& checkpoint_nodes, const RelationGraph& graph) {
  if (checkpoint_nodes != graph.nodes())
    throw std::invalid_argument("checkpoint node_index_map does not match the graph's nodes");
}

Json report_to_json(const MetricsReport& r) {
  Json doc;
  doc["key"] = r.key;
  doc["accuracy"] = r.accuracy;
  doc["macro_f1"] = r.macro_f1;
  doc["total"] = r.total;
  Json per = Json::object();
  for (auto s : kAllStances) {
    const auto& m = r.of(s);
    per[std::string(to_string(s))] = {
        {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
  }
  doc["per_class"] = std::move(per);
  Json confusion = Json::array();
  for (const auto& row : r.confusion) confusion.push_back(Json(std::vector<std::size_t>(row.begin(), row.end())));
  doc["confusion"] = std::move(confusion);
  return doc;
}

MetricsReport report_from_json(const Json& doc) {
  MetricsReport r;
  try {
    r.key = doc.at("key").get<std::string>();
    r.accuracy = doc.at("accuracy").get<double>();
    r.macro_f1 = doc.at("macro_f1").get<double>();
    r.total = doc.at("total").get<std::size_t>();
    for (auto s : kAllStances) {
      const auto& m = doc.at("per_class").at(std::string(to_string(s)));
      auto& out = r.per_class[class_index(s)];
      out.precision = m.at("precision").get<double>();
      out.recall = m.at("recall").get<double>();
      out.f1 = m.at("f1").get<double>();
      out.support = m.at("support").get<std::size_t>();
    }
    const auto& confusion = doc.at("confusion");
    if (confusion.size() != kStanceCount) throw ParseError(0, "confusion must be 3×3");
    for (std::size_t g = 0; g < kStanceCount; ++g) {
      if (confusion[g].size() != kStanceCount) throw ParseError(0, "confusion must be 3×3");
      for (std::size_t p = 0; p < kStanceCount; ++p) r.confusion[g][p] = confusion[g][p].get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("metrics report: ") + e.what());
  }
  return r;
}

Json run_report_to_json(const RunReport& r) {
  Json doc;
  doc["key"] = r.key;
  doc["seed"] = r.seed;
  doc["overall"] = report_to_json(r.overall);
  Json topics = Json::array();
  for (const auto& t : r.per_topic) topics.push_back(report_to_json(t));
  doc["per_topic"] = std::move(topics);
  Json lengths = Json::array();
  for (const auto& t : r.by_length) lengths.push_back(report_to_json(t));
  doc["by_length"] = std::move(lengths);
  doc["train_topics"] = r.train_topics;
  doc["train_size"] = r.train_size;
  doc["dev_size"] = r.dev_size;
  doc["test_size"] = r.test_size;
  doc["candidate_edges"] = r.candidate_edges;
  doc["retyped_edges"] = r.retyped_edges;
  doc["retyped_fraction"] = r.retyped_fraction;
  doc["gae_final_loss"] = r.gae_final_loss;
  doc["best_epoch"] = r.best_epoch;
  doc["best_dev_macro_f1"] = r.best_dev_macro_f1;
  return doc;
}

RunReport run_report_from_json(const Json& doc) {
  RunReport r;
  try {
    r.key = doc.at("key").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.overall = report_from_json(doc.at("overall"));
    for (const auto& t : doc.at("per_topic")) r.per_topic.push_back(report_from_json(t));
    for (const auto& t : doc.at("by_length")) r.by_length.push_back(report_from_json(t));
    r.train_topics = doc.at("train_topics").get<std::vector<std::string>>();
    r.train_size = doc.at("train_size").get<std::size_t>();
    r.dev_size = doc.at("dev_size").get<std::size_t>();
    r.test_size = doc.at("test_size").get<std::size_t>();
    r.candidate_edges = doc.at("candidate_edges").get<std::size_t>();
    r.retyped_edges = doc.at("retyped_edges").get<std::size_t>();
    r.retyped_fraction = doc.at("retyped_fraction").get<double>();
    r.gae_final_loss = doc.at("gae_final_loss").get<double>();
    r.best_epoch = doc.at("best_epoch").get<std::size_t>();
    r.best_dev_macro_f1 = doc.at("best_dev_macro_f1").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("run report: ") + e.what());
  }
  return r;
}

Json protocol_report_to_json(const ProtocolReport& r) {
  Json doc;
  doc["version"] = kFormatVersion;
  doc["section"] = "report";
  doc["mode"] = to_string(r.mode);
  Json runs = Json::array();
  for (const auto& run : r.runs) runs.push_back(run_report_to_json(run));
  doc["runs"] = std::move(runs);
  Json avgs = Json::array();
  for (const auto& a : r.averages) avgs.push_back(report_to_json(a));
  doc["averages"] = std::move(avgs);
  Json summary = Json::array();
  for (const auto& s : r.summary)
    summary.push_back({{"key", s.key},
                       {"runs", s.runs},
                       {"accuracy_mean", s.accuracy_mean},
                       {"accuracy_std", s.accuracy_std},
                       {"macro_f1_mean", s.macro_f1_mean},
                       {"macro_f1_std", s.macro_f1_std}});
  doc["summary"] = std::move(summary);
  return doc;
}

ProtocolReport protocol_report_from_json(const Json& doc) {
  expect_section(doc, "report");
  ProtocolReport r;
  try {
    const auto mode = parse_protocol_mode(doc.at("mode").get<std::string>());
    if (!mode) throw ParseError(0, "unknown protocol mode");
    r.mode = *mode;
    for (const auto& run : doc.at("runs")) r.runs.push_back(run_report_from_json(run));
    for (const auto& a : doc.at("averages")) r.averages.push_back(report_from_json(a));
    for (const auto& s : doc.at("summary")) {
      SummaryRow row;
      row.key = s.at("key").get<std::string>();
      row.runs = s.at("runs").get<std::size_t>();
      row.accuracy_mean = s.at("accuracy_mean").get<double>();
      row.accuracy_std = s.at("accuracy_std").get<double>();
      row.macro_f1_mean = s.at("macro_f1_mean").get<double>();
      row.macro_f1_std = s.at("macro_f1_std").get<double>();
      r.summary.push_back(row);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("report: ") + e.what());
  }
  return r;
}

void write_predictions(std::ostream& out, std::span<const Prediction> preds) {
  for (const auto& p : preds) {
    Json line;
    line["id"] = p.id;
    line["gold"] = to_string(p.gold);
    line["pred"] = to_string(p.pred);
    line["probs"] = std::vector<double>(p.probs.begin(), p.probs.end());
    out << line.dump() << '\n';
  }
}

std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    try {
      const auto j = Json::parse(line);
      Prediction p;
      p.id = j.at("id").get<std::string>();
      p.gold = stance_field(j, "gold");
      p.pred = stance_field(j, "pred");
      const auto probs = j.at("probs").get<std::vector<double>>();
      if (probs.size() != kStanceCount) throw ParseError(row, "probs must have three entries");
      std::copy(probs.begin(), probs.end(), p.probs.begin());
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(row, e.what());
    } catch (const ParseError& e) {
      if (e.row() != 0) throw;
      throw ParseError(row, e.what());
    }
  }
  return out;
}

void write_aggregate_csv(std::ostream& out, const ProtocolReport& report) {
  out << "mode,topic,seed,acc,macro_f1";
  for (auto s : kAllStances) out << ',' << to_string(s) << "_p," << to_string(s) << "_r," << to_string(s) << "_f1";
  out << '\n';
  const auto dbl = [](double v) { return Json(v).dump(); };
  const auto row = [&](const MetricsReport& m, const std::string& topic, const std::string& seed) {
    out << to_string(report.mode) << ',' << csv_field(topic) << ',' << seed << ',' << dbl(m.accuracy) << ',' << dbl(m.macro_f1);
    for (const auto& c : m.per_class) out << ',' << dbl(c.precision) << ',' << dbl(c.recall) << ',' << dbl(c.f1);
    out << '\n';
  };
  std::size_t avg = 0;
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const auto& run = report.runs[i];
    const auto seed = std::to_string(run.seed);
    row(run.overall, run.key, seed);
    if (report.mode == ProtocolMode::in_domain) {
      for (const auto& t : run.per_topic) row(t, t.key, seed);
      continue;
    }
    const bool last_of_seed = i + 1 == report.runs.size() || report.runs[i + 1].seed != run.seed;
    if (last_of_seed && avg < report.averages.size()) row(report.averages[avg++], "average", seed);
  }
}

}  // namespace relstance
