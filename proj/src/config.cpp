#include "relstance/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "relstance/errors.hpp"
#include "relstance/textfeat.hpp"

namespace relstance {

namespace {

constexpr ConfigKey kKeys[] = {
    {"data", "", "dataset file (JSONL or CSV)"},
    {"format", "auto", "dataset format: auto, jsonl or csv"},
    {"graph", "", "graph JSON produced by build-graph"},
    {"gae", "", "GAE checkpoint produced by pretrain-gae"},
    {"classifier", "", "classifier checkpoint produced by train"},
    {"embeddings", "", "text embedding table; hashing features when empty"},
    {"run-root", "runs", "directory that receives run directories"},
    {"split", "0.8,0.1,0.1", "train,dev,test weights, normalized to sum 1"},
    {"split-mode", "global", "global or per-topic temporal split"},
    {"protocol", "in-domain", "in-domain or cross-domain"},
    {"cross-dev-fraction", "0.1", "dev share of the training pool in cross-domain runs"},
    {"tau", "per-edge", "snapshot window: per-edge or seconds"},
    {"rho", "0.3", "probability of retyping a training edge to interaction"},
    {"seed", "1", "base seed"},
    {"seeds", "", "comma-separated seeds for repeated runs; defaults to seed"},
    {"dim", "64", "encoder width"},
    {"decoder", "distmult", "distmult, transe or hole"},
    {"transe-margin", "1", "TransE margin"},
    {"gae-lr", "0.01", "GAE learning rate"},
    {"gae-epochs", "2000", "GAE epochs"},
    {"edge-keep", "0.5", "share of edges kept as positives"},
    {"triplet-batch", "100000", "triplets per GAE step"},
    {"message-passing", "kept+interaction", "kept+interaction or all"},
    {"text-dim", "64", "hashing feature width"},
    {"fusion", "concat", "concat or add"},
    {"lambda-recon", "1", "reconstruction loss weight"},
    {"lr", "0.001", "classifier learning rate"},
    {"epochs", "30", "classifier epochs"},
    {"batch", "8", "classifier batch size"},
    {"rel-out-dim", "64", "projected relation feature width"},
    {"freeze-encoder", "true", "keep the encoder fixed during classifier training"},
    {"pretrain", "true", "pretrain the GAE; false trains it jointly from random init"},
    {"use-relations", "true", "false gives the text-only classifier"},
    {"grad-probes", "100", "finite-difference probes per check"},
    {"grad-eps", "1e-5", "finite-difference step"},
    {"grad-tolerance", "1e-5", "maximum accepted relative error"},
    {"synth-kind", "fusion", "fusion or link"},
    {"synth-records", "2000", "records in the fusion dataset"},
    {"synth-hubs", "120", "hubs in the fusion dataset"},
    {"synth-topics", "5", "topics in the fusion dataset"},
    {"synth-per-community", "30", "nodes per community in the link graph"},
};

// Keys that only say where things live; they stay out of the run hash.
constexpr std::string_view kLocationKeys[] = {"run-root"};

const ConfigKey* find_key(std::string_view key) noexcept {
  for (const auto& k : kKeys)
    if (k.name == key) return &k;
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw std::invalid_argument(std::string(key) + ": '" + std::string(value) + "' is not " + std::string(want));
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a number");
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

}  // namespace

std::span<const ConfigKey> config_keys() noexcept { return kKeys; }

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_.emplace(std::string(k.name), std::string(k.default_value));
}

bool RunConfig::is_known(std::string_view key) noexcept { return find_key(key) != nullptr; }

std::string RunConfig::env_name(std::string_view key) {
  std::string out = "RELSTANCE_";
  for (char c : key) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void RunConfig::set(std::string_view key, std::string value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
  it->second = trim(value);
}

void RunConfig::assign(std::string_view key_value) {
  const auto eq = key_value.find('=');
  if (eq == std::string_view::npos) throw std::invalid_argument("expected key=value, got '" + std::string(key_value) + "'");
  set(trim(key_value.substr(0, eq)), std::string(key_value.substr(eq + 1)));
}

const std::string& RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
  return it->second;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    const auto body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    try {
      assign(body);
    } catch (const std::invalid_argument& e) {
      throw ParseError(row, path.string() + ": " + e.what());
    }
  }
}

void RunConfig::apply_env(const std::function<std::optional<std::string>(const std::string&)>& lookup) {
  for (const auto& k : kKeys)
    if (auto v = lookup(env_name(k.name))) set(k.name, *v);
}

void RunConfig::apply_env() {
  apply_env([](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  });
}

double RunConfig::get_double(std::string_view key) const { return parse_double(key, get(key)); }
std::uint64_t RunConfig::get_u64(std::string_view key) const { return parse_u64(key, get(key)); }
std::size_t RunConfig::get_size(std::string_view key) const { return static_cast<std::size_t>(get_u64(key)); }

bool RunConfig::get_bool(std::string_view key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

SplitRatios RunConfig::split_ratios() const {
  const auto parts = split_list(get("split"));
  if (parts.size() != 3) bad_value("split", get("split"), "three comma-separated weights");
  SplitRatios r{};
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    r[i] = parse_double("split", parts[i]);
    if (!(r[i] > 0.0)) bad_value("split", get("split"), "a list of positive weights");
    sum += r[i];
  }
  for (auto& v : r) v /= sum;
  return r;
}

std::vector<std::uint64_t> RunConfig::seeds() const {
  const auto parts = split_list(get("seeds"));
  if (parts.empty()) return {get_u64("seed")};
  std::vector<std::uint64_t> out;
  for (const auto& p : parts) out.push_back(parse_u64("seeds", p));
  return out;
}

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig cfg;
  cfg.split = split_ratios();
  const auto split_mode = parse_split_mode(get("split-mode"));
  if (!split_mode) bad_value("split-mode", get("split-mode"), "global or per-topic");
  cfg.split_mode = *split_mode;
  cfg.tau = Tau::parse(get("tau"));
  cfg.rho = get_double("rho");
  cfg.seed = get_u64("seed");
  cfg.cross_dev_fraction = get_double("cross-dev-fraction");
  cfg.pretrain = get_bool("pretrain");

  auto& g = cfg.gae;
  g.learning_rate = get_double("gae-lr");
  g.epochs = get_size("gae-epochs");
  g.triplet_batch = get_size("triplet-batch");
  g.edge_keep_fraction = get_double("edge-keep");
  g.seed = cfg.seed;
  g.dim = get_size("dim");
  const auto decoder = parse_decoder(get("decoder"));
  if (!decoder) bad_value("decoder", get("decoder"), "distmult, transe or hole");
  g.decoder = *decoder;
  g.transe_margin = get_double("transe-margin");
  const auto& mp = get("message-passing");
  if (mp == "kept+interaction") {
    g.message_passing = MessagePassing::kept_plus_interaction;
  } else if (mp == "all") {
    g.message_passing = MessagePassing::all_edges;
  } else {
    bad_value("message-passing", mp, "kept+interaction or all");
  }

  auto& c = cfg.classifier;
  c.learning_rate = get_double("lr");
  c.epochs = get_size("epochs");
  c.batch_size = get_size("batch");
  c.lambda_recon = get_double("lambda-recon");
  c.finetune_encoder = !get_bool("freeze-encoder");
  c.rel_out_dim = get_size("rel-out-dim");
  const auto fusion = parse_fusion(get("fusion"));
  if (!fusion) bad_value("fusion", get("fusion"), "concat or add");
  c.fusion = *fusion;
  c.use_relations = get_bool("use-relations");
  c.seed = cfg.seed;

  cfg.validate();
  return cfg;
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::string RunConfig::hash() const {
  std::string text;
  for (const auto& [k, v] : values_) {
    if (std::find(std::begin(kLocationKeys), std::end(kLocationKeys), k) != std::end(kLocationKeys)) continue;
    text += k + "=" + v + "\n";
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

}  // namespace relstance
