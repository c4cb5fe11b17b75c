#include "relstance/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relstance/autoenc.hpp"
#include "relstance/classifier.hpp"
#include "relstance/config.hpp"
#include "relstance/errors.hpp"
#include "relstance/ingest.hpp"
#include "relstance/protocol.hpp"
#include "relstance/serialize.hpp"
#include "relstance/synth.hpp"
#include "relstance/textfeat.hpp"

namespace fs = std::filesystem;

namespace relstance {

namespace {

// Failed precondition: reported with exit code 1.
struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Invocation {
  std::string command;
  RunConfig config;
  std::string sweep;
  fs::path run_dir;
  std::ostream* out = nullptr;
};

Json config_json(const Invocation& inv) {
  Json j;
  j["command"] = inv.command;
  j["hash"] = inv.config.hash();
  Json values = Json::object();
  for (const auto& [k, v] : inv.config.values()) values[k] = v;
  j["values"] = std::move(values);
  return j;
}

const std::string& require(const Invocation& inv, std::string_view key) {
  const auto& v = inv.config.get(key);
  if (v.empty()) throw Failure(inv.command + " needs --" + std::string(key));
  return v;
}

std::vector<InteractionRecord> load_records(const Invocation& inv) {
  const fs::path path = require(inv, "data");
  const auto& f = inv.config.get("format");
  DatasetFormat format;
  if (f == "auto") {
    format = format_from_extension(path);
  } else if (auto parsed = parse_dataset_format(f)) {
    format = *parsed;
  } else {
    throw std::invalid_argument("format: '" + f + "' is not auto, jsonl or csv");
  }
  return parse_dataset(path, format);
}

TextFeatureSource text_source(const Invocation& inv) {
  const auto& path = inv.config.get("embeddings");
  if (path.empty()) return TextFeatureSource::hashing(inv.config.get_size("text-dim"));
  return TextFeatureSource::table(load_embedding_table(path));
}

RelationGraph load_graph(const Invocation& inv) { return graph_from_json(read_json_file(require(inv, "graph"))); }

void write_with_config(const Invocation& inv, const std::string& name, Json doc, int indent = 1) {
  doc["config"] = config_json(inv);
  write_json_file(inv.run_dir / name, doc, indent);
}

Json topic_stats(const std::vector<InteractionRecord>& records) {
  Json stats = Json::array();
  for (const auto& topic : topics_of(records)) {
    std::vector<std::string> authors;
    std::array<std::size_t, kStanceCount> labels{};
    std::size_t n = 0;
    for (const auto& r : records) {
      if (r.topic != topic) continue;
      ++n;
      ++labels[class_index(r.label)];
      authors.push_back(r.comment_author);
      authors.push_back(r.reply_author);
    }
    std::sort(authors.begin(), authors.end());
    authors.erase(std::unique(authors.begin(), authors.end()), authors.end());
    Json row{{"topic", topic}, {"records", n}, {"authors", authors.size()}};
    for (auto s : kAllStances) row[std::string(to_string(s))] = labels[class_index(s)];
    stats.push_back(std::move(row));
  }
  return stats;
}

void cmd_build_graph(const Invocation& inv) {
  const auto records = load_records(inv);
  const auto cfg = inv.config.pipeline();
  const auto graph = build_training_graph(split_for(records, cfg), cfg.tau, cfg.rho, cfg.seed);
  write_with_config(inv, "graph.json", graph_to_json(graph), -1);
  write_with_config(inv, "stats.json", Json{{"topics", topic_stats(records)}});
  auto& out = *inv.out;
  out << "nodes=" << graph.node_count() << " edges=" << graph.edge_count();
  for (auto r : kAllRelations) out << ' ' << to_string(r) << '=' << graph.relation_count(r);
  out << " retyped=" << graph.retyped().size() << '\n';
}

void cmd_pretrain_gae(const Invocation& inv) {
  const auto graph = load_graph(inv);
  const auto cfg = effective_gae_config(inv.config.pipeline());
  const auto result = train_gae(graph, cfg);
  write_with_config(inv, "gae.json", gae_to_json({result.params, graph.nodes(), cfg.seed}), -1);
  write_with_config(inv, "gae_log.json", Json{{"loss_history", result.loss_history}, {"final_loss", result.final_loss}});
  *inv.out << "final_loss=" << Json(result.final_loss).dump() << '\n';
}

void cmd_featurize(const Invocation& inv) {
  const auto records = load_records(inv);
  const auto table = featurize_records(records, inv.config.get_size("text-dim"));
  write_embedding_table(inv.run_dir / "embeddings.tsv", table);
  write_with_config(inv, "featurize.json", Json::object());
  *inv.out << "rows=" << table.size() << " dim=" << table.dim() << '\n';
}

GaeCheckpoint encoder_for(const Invocation& inv, const RelationGraph& graph, const PipelineConfig& cfg) {
  if (!cfg.pretrain) {
    const auto g = effective_gae_config(cfg);
    return {init_gae_params(graph.node_count(), g.dim, g.decoder, g.seed, g.transe_margin), graph.nodes(), g.seed};
  }
  auto ckpt = gae_from_json(read_json_file(require(inv, "gae")));
  check_node_map(ckpt.nodes, graph);
  return ckpt;
}

void cmd_train(const Invocation& inv) {
  const auto records = load_records(inv);
  const auto cfg = inv.config.pipeline();
  const auto graph = load_graph(inv);
  auto encoder = encoder_for(inv, graph, cfg);
  const auto split = split_for(records, cfg);
  const auto text = text_source(inv);
  const auto result = train_classifier(split, graph, encoder.params, text, effective_classifier_config(cfg));
  encoder.params = result.gae;
  write_with_config(inv, "classifier.json", classifier_to_json({result.params, encoder}), -1);
  write_with_config(inv, "train_log.json",
                    Json{{"best_epoch", result.best_epoch},
                         {"best_dev_macro_f1", result.best_dev_macro_f1},
                         {"dev_macro_f1", result.dev_macro_f1},
                         {"train_loss", result.train_loss}});
  *inv.out << "best_epoch=" << result.best_epoch << " dev_macro_f1=" << Json(result.best_dev_macro_f1).dump()
           << '\n';
}

void write_report(const Invocation& inv, const std::string& stem, const ProtocolReport& report) {
  write_with_config(inv, stem + ".json", protocol_report_to_json(report));
  std::ofstream csv(inv.run_dir / (stem + ".csv"));
  write_aggregate_csv(csv, report);
  if (!csv) throw std::runtime_error("failed writing " + stem + ".csv");
}

void print_summary(const Invocation& inv, const ProtocolReport& report, const std::string& prefix) {
  for (const auto& row : report.summary)
    *inv.out << prefix << row.key << " acc=" << Json(row.accuracy_mean).dump()
             << " macro_f1=" << Json(row.macro_f1_mean).dump() << " runs=" << row.runs << '\n';
}

void cmd_evaluate(const Invocation& inv) {
  const auto records = load_records(inv);
  const auto text = text_source(inv);

  if (!inv.config.get("classifier").empty()) {
    if (!inv.sweep.empty()) throw Failure("--sweep runs full pipelines and cannot be combined with --classifier");
    const auto cfg = inv.config.pipeline();
    const auto graph = load_graph(inv);
    const auto ckpt = classifier_from_json(read_json_file(inv.config.get("classifier")));
    check_node_map(ckpt.gae.nodes, graph);
    std::vector<Prediction> preds;
    ProtocolReport report;
    report.runs.push_back(evaluate_split(split_for(records, cfg), graph, ckpt.gae.params, ckpt.params, text, &preds));
    report.runs.back().seed = cfg.seed;
    report.summary.push_back({"all", 1, report.runs.back().overall.accuracy, 0.0, report.runs.back().overall.macro_f1,
                              0.0});
    write_report(inv, "report", report);
    std::ofstream pred_out(inv.run_dir / "predictions.jsonl");
    write_predictions(pred_out, preds);
    print_summary(inv, report, "");
    return;
  }

  const auto mode = parse_protocol_mode(inv.config.get("protocol"));
  if (!mode) throw std::invalid_argument("protocol: '" + inv.config.get("protocol") + "' is not in-domain or cross-domain");

  std::string sweep_key;
  std::vector<std::string> sweep_values{""};
  if (!inv.sweep.empty()) {
    const auto eq = inv.sweep.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--sweep expects key=v1,v2,...");
    sweep_key = inv.sweep.substr(0, eq);
    if (!RunConfig::is_known(sweep_key)) throw std::invalid_argument("unknown sweep key '" + sweep_key + "'");
    sweep_values = split_list(inv.sweep.substr(eq + 1));
    if (sweep_values.empty()) throw std::invalid_argument("--sweep lists no values");
  }

  Json index = Json::array();
  for (const auto& value : sweep_values) {
    Invocation run = inv;
    std::string stem = "report";
    if (!sweep_key.empty()) {
      run.config.set(sweep_key, value);
      stem += "-" + sweep_key + "-" + value;
    }
    const auto report = run_protocol(records, *mode, text, run.config.pipeline(), run.config.seeds());
    write_report(run, stem, report);
    if (!sweep_key.empty()) {
      Json fractions = Json::array();
      for (const auto& r : report.runs) fractions.push_back(r.retyped_fraction);
      index.push_back({{"key", sweep_key}, {"value", value}, {"report", stem + ".json"}, {"retyped_fraction", fractions}});
    }
    print_summary(inv, report, sweep_key.empty() ? "" : sweep_key + "=" + value + " ");
  }
  if (!sweep_key.empty()) write_with_config(inv, "sweep.json", Json{{"reports", index}});
}

// Small fixed graph and batch so every decoder and the full classifier path are probed.
void cmd_grad_check(const Invocation& inv) {
  const auto& c = inv.config;
  const auto probes = c.get_size("grad-probes");
  const double eps = c.get_double("grad-eps");
  const double tol = c.get_double("grad-tolerance");
  const auto seed = c.get_u64("seed");
  const auto dim = c.get_size("dim");

  FusionSynthConfig synth;
  synth.records = 60;
  synth.hubs = 6;
  synth.commenters_per_hub = 3;
  synth.topics = 2;
  synth.max_words = 12;
  synth.seed = seed;
  const auto records = fusion_dataset(synth);
  const auto split = temporal_split(records);
  const auto graph = build_training_graph(split, Tau::per_edge(), c.get_double("rho"), seed);

  bool ok = true;
  const auto report = [&](const std::string& name, double err) {
    const bool pass = err < tol;
    ok = ok && pass;
    *inv.out << name << " max_rel_err=" << Json(err).dump() << (pass ? " PASS" : " FAIL") << '\n';
  };
  for (auto decoder : {DecoderKind::distmult, DecoderKind::transe, DecoderKind::hole}) {
    const auto params = init_gae_params(graph.node_count(), dim, decoder, seed, c.get_double("transe-margin"));
    report(std::string("gae-") + std::string(to_string(decoder)), finite_diff_check(params, graph, probes, eps, seed));
  }

  const auto text = TextFeatureSource::hashing(c.get_size("text-dim"));
  const auto batch = make_examples(split.train, graph, text);
  const std::span<const LabeledExample> head(batch.data(), std::min<std::size_t>(batch.size(), 6));
  const auto gae = init_gae_params(graph.node_count(), dim, DecoderKind::distmult, seed);
  for (auto fusion : {FusionMode::concat, FusionMode::add}) {
    ClassifierShape shape;
    shape.text_dim = text.dim();
    shape.graph_dim = dim;
    shape.rel_out_dim = fusion == FusionMode::add ? text.dim() : c.get_size("rel-out-dim");
    shape.fusion = fusion;
    const auto params = init_classifier_params(shape, seed);
    for (bool finetune : {false, true}) {
      report(std::string("classifier-") + std::string(to_string(fusion)) + (finetune ? "-finetune" : "-frozen"),
             classifier_finite_diff_check(head, params, gae, graph, c.get_double("lambda-recon"), finetune, probes,
                                          eps, seed));
    }
  }
  write_with_config(inv, "grad_check.json", Json{{"passed", ok}});
  if (!ok) throw Failure("gradient check failed");
}

void cmd_synth(const Invocation& inv) {
  const auto& c = inv.config;
  const auto& kind = c.get("synth-kind");
  if (kind == "fusion") {
    FusionSynthConfig cfg;
    cfg.records = c.get_size("synth-records");
    cfg.hubs = c.get_size("synth-hubs");
    cfg.topics = c.get_size("synth-topics");
    cfg.seed = c.get_u64("seed");
    const auto records = fusion_dataset(cfg);
    write_dataset(inv.run_dir / "dataset.jsonl", records, DatasetFormat::jsonl);
    *inv.out << "records=" << records.size() << '\n';
  } else if (kind == "link") {
    const auto graph = two_community_graph(c.get_size("synth-per-community"));
    const auto split = holdout_edges(graph, 0.2, c.get_u64("seed"));
    write_with_config(inv, "graph.json", graph_to_json(graph), -1);
    write_with_config(inv, "graph-train.json", graph_to_json(split.train), -1);
    Json held = Json::array();
    for (const auto& e : split.heldout)
      held.push_back(Json::array({graph.nodes()[e.src], to_string(e.relation), graph.nodes()[e.dst]}));
    write_with_config(inv, "heldout.json", Json{{"edges", held}});
    *inv.out << "nodes=" << graph.node_count() << " edges=" << graph.edge_count()
             << " heldout=" << split.heldout.size() << '\n';
  } else {
    throw std::invalid_argument("synth-kind: '" + kind + "' is not fusion or link");
  }
  write_with_config(inv, "synth.json", Json::object());
}

using Handler = void (*)(const Invocation&);

struct Command {
  const char* name;
  const char* help;
  Handler run;
};

constexpr Command kCommands[] = {
    {"build-graph", "build the relation graph from the training split", cmd_build_graph},
    {"pretrain-gae", "pretrain the relational graph autoencoder", cmd_pretrain_gae},
    {"featurize", "write hashing text features as an embedding table", cmd_featurize},
    {"train", "train the stance classifier", cmd_train},
    {"evaluate", "evaluate a checkpoint or run the in-domain / cross-domain protocol", cmd_evaluate},
    {"grad-check", "finite-difference gradient checks", cmd_grad_check},
    {"synth", "write synthetic datasets and graphs", cmd_synth},
};

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relation-aware stance classification", "relstance"};
  app.require_subcommand(1, 1);

  std::map<std::string, std::string> flags;
  std::map<std::string, CLI::Option*> options;
  std::string config_file;
  std::vector<std::string> sets;
  std::string sweep;
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : kCommands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_file, "flat key=value config file");
    sub->add_option("--set", sets, "key=value override, repeatable");
    for (const auto& key : config_keys()) {
      const std::string name(key.name);
      auto* opt = sub->add_option("--" + name, flags[name], std::string(key.help));
      options[std::string(cmd.name) + "/" + name] = opt;
    }
    if (std::string_view(cmd.name) == "evaluate") sub->add_option("--sweep", sweep, "key=v1,v2,... one report per value");
    subs[cmd.name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  const Command* chosen = nullptr;
  for (const auto& cmd : kCommands)
    if (subs[cmd.name]->parsed()) chosen = &cmd;

  Invocation inv;
  inv.command = chosen->name;
  inv.sweep = sweep;
  inv.out = &out;
  try {
    if (!config_file.empty()) inv.config.load_file(config_file);
    inv.config.apply_env();
    for (const auto& kv : sets) inv.config.assign(kv);
    for (const auto& key : config_keys()) {
      const std::string name(key.name);
      if (options[inv.command + "/" + name]->count() > 0) inv.config.set(name, flags[name]);
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  bool fresh = false;
  try {
    std::string dir = inv.command + "-" + inv.config.hash();
    if (!inv.sweep.empty()) dir += "-sweep-" + inv.sweep.substr(0, inv.sweep.find('='));
    inv.run_dir = fs::path(inv.config.get("run-root")) / dir;
    fresh = !fs::exists(inv.run_dir);
    fs::create_directories(inv.run_dir);
    write_json_file(inv.run_dir / "config.json", config_json(inv));
    chosen->run(inv);
    out << "run_dir=" << inv.run_dir.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    std::error_code ec;
    if (fresh) fs::remove_all(inv.run_dir, ec);
    return 1;
  }
}

int dispatch(int argc, const char* const* argv) { return dispatch(argc, argv, std::cout, std::cerr); }

}  // namespace relstance
