#include "relstance/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace relstance {

namespace {

std::vector<std::string> unique_topics(const std::vector<InteractionRecord>& records) {
  std::vector<std::string> topics = topics_of(records);
  std::sort(topics.begin(), topics.end());
  return topics;
}

void add_summary(std::vector<SummaryRow>& rows, const std::string& key, const std::vector<const MetricsReport*>& reps) {
  SummaryRow row;
  row.key = key;
  row.runs = reps.size();
  for (const auto* r : reps) {
    row.accuracy_mean += r->accuracy;
    row.macro_f1_mean += r->macro_f1;
  }
  const double n = static_cast<double>(reps.size());
  row.accuracy_mean /= n;
  row.macro_f1_mean /= n;
  if (reps.size() > 1) {
    for (const auto* r : reps) {
      row.accuracy_std += (r->accuracy - row.accuracy_mean) * (r->accuracy - row.accuracy_mean);
      row.macro_f1_std += (r->macro_f1 - row.macro_f1_mean) * (r->macro_f1 - row.macro_f1_mean);
    }
    row.accuracy_std = std::sqrt(row.accuracy_std / (n - 1.0));
    row.macro_f1_std = std::sqrt(row.macro_f1_std / (n - 1.0));
  }
  rows.push_back(row);
}

}  // namespace

std::string_view to_string(ProtocolMode m) noexcept {
  return m == ProtocolMode::in_domain ? "in-domain" : "cross-domain";
}

std::optional<ProtocolMode> parse_protocol_mode(std::string_view s) noexcept {
  if (s == "in-domain" || s == "in_domain") return ProtocolMode::in_domain;
  if (s == "cross-domain" || s == "cross_domain") return ProtocolMode::cross_domain;
  return std::nullopt;
}

std::string_view to_string(SplitMode m) noexcept { return m == SplitMode::global ? "global" : "per-topic"; }

std::optional<SplitMode> parse_split_mode(std::string_view s) noexcept {
  if (s == "global") return SplitMode::global;
  if (s == "per-topic" || s == "per_topic") return SplitMode::per_topic;
  return std::nullopt;
}

void PipelineConfig::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [0, 1]");
  if (!(cross_dev_fraction > 0.0 && cross_dev_fraction < 1.0))
    throw std::invalid_argument("cross-domain dev fraction must lie in (0, 1)");
  gae.validate();
  classifier.validate();
}

GaeTrainConfig effective_gae_config(const PipelineConfig& cfg) {
  GaeTrainConfig g = cfg.gae;
  g.seed = cfg.seed;
  return g;
}

ClassifierTrainConfig effective_classifier_config(const PipelineConfig& cfg) {
  ClassifierTrainConfig c = cfg.classifier;
  c.seed = cfg.seed;
  if (!cfg.pretrain) c.finetune_encoder = true;
  return c;
}

std::size_t candidate_edge_count(const RelationGraph& graph) {
  const std::size_t injected = graph.relation_count(RelationType::interaction) - graph.retyped().size();
  return graph.edge_count() - injected;
}

RunReport evaluate_split(const DatasetSplit& split, const RelationGraph& graph, const GaeParams& gae,
                         const ClassifierParams& classifier, const TextFeatureSource& text,
                         std::vector<Prediction>* predictions) {
  const auto test = make_examples(split.test, graph, text);
  auto preds = predict_examples(test, classifier, gae, graph);

  RunReport rep;
  rep.key = "all";
  rep.train_size = split.train.size();
  rep.dev_size = split.dev.size();
  rep.test_size = split.test.size();
  rep.train_topics = unique_topics(split.train);
  rep.candidate_edges = candidate_edge_count(graph);
  rep.retyped_edges = graph.retyped().size();
  rep.retyped_fraction = rep.candidate_edges == 0 ? 0.0
                                                  : static_cast<double>(rep.retyped_edges) /
                                                        static_cast<double>(rep.candidate_edges);

  std::vector<Stance> p, g;
  std::vector<std::size_t> tokens;
  for (std::size_t i = 0; i < test.size(); ++i) {
    p.push_back(preds[i].pred);
    g.push_back(preds[i].gold);
    tokens.push_back(test[i].token_count);
  }
  rep.overall = compute_metrics(p, g, "all");
  for (const auto& topic : topics_of(split.test)) {
    std::vector<Stance> tp, tg;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (test[i].topic != topic) continue;
      tp.push_back(p[i]);
      tg.push_back(g[i]);
    }
    rep.per_topic.push_back(compute_metrics(tp, tg, topic));
  }
  const auto buckets = bucket_by_length(tokens, p, g);
  rep.by_length.assign(buckets.begin(), buckets.end());
  if (predictions) *predictions = std::move(preds);
  return rep;
}

PipelineRun run_pipeline(const DatasetSplit& split, const TextFeatureSource& text, const PipelineConfig& cfg) {
  cfg.validate();
  PipelineRun run;
  run.graph = build_training_graph(split, cfg.tau, cfg.rho, cfg.seed);

  const GaeTrainConfig gae_cfg = effective_gae_config(cfg);
  double gae_loss = 0.0;
  if (cfg.pretrain) {
    auto trained = train_gae(run.graph, gae_cfg);
    run.gae = std::move(trained.params);
    gae_loss = trained.final_loss;
  } else {
    run.gae = init_gae_params(run.graph.node_count(), gae_cfg.dim, gae_cfg.decoder, gae_cfg.seed,
                              gae_cfg.transe_margin);
  }

  const auto train = make_examples(split.train, run.graph, text);
  const auto dev = make_examples(split.dev, run.graph, text);
  auto trained = train_classifier(train, dev, run.graph, run.gae, effective_classifier_config(cfg));
  run.classifier = std::move(trained.params);
  run.gae = std::move(trained.gae);

  run.report = evaluate_split(split, run.graph, run.gae, run.classifier, text, &run.predictions);
  run.report.seed = cfg.seed;
  run.report.gae_final_loss = gae_loss;
  run.report.best_epoch = trained.best_epoch;
  run.report.best_dev_macro_f1 = trained.best_dev_macro_f1;
  return run;
}

DatasetSplit split_for(const std::vector<InteractionRecord>& records, const PipelineConfig& cfg) {
  return cfg.split_mode == SplitMode::global ? temporal_split(records, cfg.split)
                                             : temporal_split_per_topic(records, cfg.split);
}

DatasetSplit cross_domain_split(const std::vector<InteractionRecord>& records, const std::string& topic,
                                double dev_fraction) {
  std::vector<InteractionRecord> pool, test;
  for (const auto& r : records) (r.topic == topic ? test : pool).push_back(r);
  if (test.empty()) throw std::invalid_argument("no records for topic " + topic);
  const auto by_time = [](const InteractionRecord& a, const InteractionRecord& b) {
    return a.timestamp < b.timestamp;
  };
  std::stable_sort(pool.begin(), pool.end(), by_time);
  std::stable_sort(test.begin(), test.end(), by_time);
  const auto n_dev = static_cast<std::size_t>(std::floor(dev_fraction * static_cast<double>(pool.size()) + 1e-9));
  if (n_dev == 0 || n_dev >= pool.size())
    throw std::invalid_argument("training pool for held-out topic " + topic + " is too small to split");
  DatasetSplit split;
  split.train.assign(pool.begin(), pool.end() - static_cast<std::ptrdiff_t>(n_dev));
  split.dev.assign(pool.end() - static_cast<std::ptrdiff_t>(n_dev), pool.end());
  split.test = std::move(test);
  return split;
}

ProtocolReport run_protocol(const std::vector<InteractionRecord>& records, ProtocolMode mode,
                            const TextFeatureSource& text, const PipelineConfig& cfg,
                            const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (records.empty()) throw std::invalid_argument("empty dataset");
  const auto topics = topics_of(records);
  if (mode == ProtocolMode::cross_domain && topics.size() < 2)
    throw std::invalid_argument("cross-domain evaluation needs at least two topics, found " +
                                std::to_string(topics.size()));

  ProtocolReport out;
  out.mode = mode;
  for (const auto seed : seeds) {
    PipelineConfig run_cfg = cfg;
    run_cfg.seed = seed;
    if (mode == ProtocolMode::in_domain) {
      out.runs.push_back(run_pipeline(split_for(records, run_cfg), text, run_cfg).report);
      continue;
    }
    std::vector<MetricsReport> held_out;
    for (const auto& topic : topics) {
      auto rep = run_pipeline(cross_domain_split(records, topic, cfg.cross_dev_fraction), text, run_cfg).report;
      if (std::find(rep.train_topics.begin(), rep.train_topics.end(), topic) != rep.train_topics.end())
        throw std::logic_error("held-out topic " + topic + " leaked into training");
      rep.key = topic;
      rep.overall.key = topic;
      held_out.push_back(rep.overall);
      out.runs.push_back(std::move(rep));
    }
    out.averages.push_back(average_reports(held_out, "average"));
  }

  // Group reports by key across seeds, keeping first-seen key order.
  std::vector<std::string> keys;
  std::map<std::string, std::vector<const MetricsReport*>> grouped;
  const auto collect = [&](const MetricsReport& r, const std::string& key) {
    if (!grouped.contains(key)) keys.push_back(key);
    grouped[key].push_back(&r);
  };
  for (const auto& run : out.runs) {
    collect(run.overall, run.key);
    if (mode == ProtocolMode::in_domain)
      for (const auto& t : run.per_topic) collect(t, "topic:" + t.key);
  }
  for (const auto& avg : out.averages) collect(avg, avg.key);
  for (const auto& key : keys) add_summary(out.summary, key, grouped[key]);
  return out;
}

}  // namespace relstance
