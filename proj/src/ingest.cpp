#include "relstance/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "relstance/errors.hpp"

namespace relstance {

namespace {

constexpr std::array<std::string_view, 8> kColumns{"id",           "comment",      "reply", "comment_author",
                                                   "reply_author", "label", "timestamp", "topic"};

std::int64_t parse_timestamp_text(std::string_view s, std::size_t row) {
  std::int64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || s.empty())
    throw ParseError(row, "non-numeric timestamp '" + std::string(s) + "'");
  if (v < 0) throw ParseError(row, "negative timestamp");
  return v;
}

std::int64_t parse_timestamp_json(const nlohmann::json& v, std::size_t row) {
  if (v.is_number_unsigned()) return static_cast<std::int64_t>(v.get<std::uint64_t>());
  if (v.is_number_integer()) {
    auto t = v.get<std::int64_t>();
    if (t < 0) throw ParseError(row, "negative timestamp");
    return t;
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (!std::isfinite(d) || d < 0 || d != std::floor(d) || d > 9.2e18)
      throw ParseError(row, "timestamp must be a non-negative integer");
    return static_cast<std::int64_t>(d);
  }
  if (v.is_string()) return parse_timestamp_text(v.get_ref<const std::string&>(), row);
  throw ParseError(row, "non-numeric timestamp");
}

Stance parse_label(std::string_view s, std::size_t row) {
  auto st = parse_stance(s);
  if (!st) throw ParseError(row, "unknown label '" + std::string(s) + "'");
  return *st;
}

void check_authors(const InteractionRecord& r, std::size_t row) {
  if (r.comment_author.empty()) throw ParseError(row, "empty comment_author");
  if (r.reply_author.empty()) throw ParseError(row, "empty reply_author");
}

InteractionRecord record_from_json(const nlohmann::json& j, std::size_t row, bool& has_id) {
  if (!j.is_object()) throw ParseError(row, "expected a JSON object");
  auto str = [&](std::string_view key) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(row, "missing field '" + std::string(key) + "'");
    if (!it->is_string()) throw ParseError(row, "field '" + std::string(key) + "' must be a string");
    return it->get<std::string>();
  };
  InteractionRecord r;
  has_id = j.contains("id");
  if (has_id) {
    const auto& id = j.at("id");
    r.id = id.is_string() ? id.get<std::string>() : id.dump();
  }
  r.comment_text = str("comment");
  r.reply_text = str("reply");
  r.comment_author = str("comment_author");
  r.reply_author = str("reply_author");
  r.label = parse_label(str("label"), row);
  auto ts = j.find("timestamp");
  if (ts == j.end()) throw ParseError(row, "missing field 'timestamp'");
  r.timestamp = parse_timestamp_json(*ts, row);
  r.topic = str("topic");
  check_authors(r, row);
  return r;
}

// RFC 4180 reader: quoted fields may contain separators, doubled quotes and newlines.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  bool next(std::vector<std::string>& fields) {
    fields.clear();
    int c = in_.get();
    if (c == EOF) return false;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (;; c = in_.get()) {
      if (quoted) {
        if (c == EOF) throw ParseError(0, "unterminated quoted CSV field");
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          field.push_back(static_cast<char>(c));
        }
        continue;
      }
      if (c == EOF || c == '\n') {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        if (any || !field.empty()) fields.push_back(std::move(field));
        return true;
      }
      any = true;
      if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else if (c == '"' && field.empty()) {
        quoted = true;
      } else {
        field.push_back(static_cast<char>(c));
      }
    }
  }

 private:
  std::istream& in_;
};

std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<InteractionRecord> parse_jsonl(std::istream& in, std::vector<bool>& explicit_id) {
  std::vector<InteractionRecord> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++row;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(row, std::string("invalid JSON: ") + e.what());
    }
    bool has_id = false;
    out.push_back(record_from_json(j, row, has_id));
    explicit_id.push_back(has_id);
  }
  return out;
}

std::vector<InteractionRecord> parse_csv(std::istream& in, std::vector<bool>& explicit_id) {
  CsvReader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw ParseError(0, "empty CSV file (missing header)");
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);
  for (auto name : kColumns) {
    if (name != "id" && !col.contains(std::string(name)))
      throw ParseError(0, "CSV header lacks column '" + std::string(name) + "'");
  }
  const bool has_id_col = col.contains("id");

  std::vector<InteractionRecord> out;
  std::vector<std::string> fields;
  std::size_t row = 0;
  while (true) {
    try {
      if (!reader.next(fields)) break;
    } catch (const ParseError& e) {
      throw ParseError(row + 1, e.what());
    }
    if (fields.empty()) continue;
    ++row;
    auto get = [&](std::string_view name) -> const std::string& {
      std::size_t i = col.at(std::string(name));
      if (i >= fields.size()) throw ParseError(row, "missing field '" + std::string(name) + "'");
      return fields[i];
    };
    InteractionRecord r;
    bool has_id = false;
    if (has_id_col) {
      std::size_t i = col.at("id");
      if (i < fields.size() && !fields[i].empty()) {
        r.id = fields[i];
        has_id = true;
      }
    }
    r.comment_text = get("comment");
    r.reply_text = get("reply");
    r.comment_author = get("comment_author");
    r.reply_author = get("reply_author");
    r.label = parse_label(get("label"), row);
    r.timestamp = parse_timestamp_text(get("timestamp"), row);
    r.topic = get("topic");
    check_authors(r, row);
    out.push_back(std::move(r));
    explicit_id.push_back(has_id);
  }
  return out;
}

}  // namespace

std::string_view to_string(Stance s) noexcept {
  switch (s) {
    case Stance::agree: return "agree";
    case Stance::disagree: return "disagree";
    case Stance::neutral: return "neutral";
  }
  return "neutral";
}

std::optional<Stance> parse_stance(std::string_view s) noexcept {
  if (s == "agree") return Stance::agree;
  if (s == "disagree") return Stance::disagree;
  if (s == "neutral") return Stance::neutral;
  return std::nullopt;
}

int stance_sign(Stance s) noexcept {
  switch (s) {
    case Stance::agree: return 1;
    case Stance::disagree: return -1;
    case Stance::neutral: return 0;
  }
  return 0;
}

std::optional<DatasetFormat> parse_dataset_format(std::string_view s) noexcept {
  if (s == "jsonl") return DatasetFormat::jsonl;
  if (s == "csv") return DatasetFormat::csv;
  return std::nullopt;
}

DatasetFormat format_from_extension(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::csv : DatasetFormat::jsonl;
}

std::vector<InteractionRecord> parse_dataset(std::istream& in, DatasetFormat format) {
  std::vector<bool> explicit_id;
  auto records = format == DatasetFormat::jsonl ? parse_jsonl(in, explicit_id) : parse_csv(in, explicit_id);

  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (explicit_id[i] && !seen.insert(records[i].id).second)
      throw ParseError(i + 1, "duplicate id '" + records[i].id + "'");
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (explicit_id[i]) continue;
    records[i].id = std::to_string(i);
    if (!seen.insert(records[i].id).second)
      throw ParseError(i + 1, "generated id '" + records[i].id + "' collides with an explicit id");
  }
  return records;
}

std::vector<InteractionRecord> parse_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open dataset '" + path.string() + "'");
  return parse_dataset(in, format);
}

void write_dataset(std::ostream& out, const std::vector<InteractionRecord>& records, DatasetFormat format) {
  if (format == DatasetFormat::jsonl) {
    for (const auto& r : records) {
      nlohmann::ordered_json j;
      j["id"] = r.id;
      j["comment"] = r.comment_text;
      j["reply"] = r.reply_text;
      j["comment_author"] = r.comment_author;
      j["reply_author"] = r.reply_author;
      j["label"] = to_string(r.label);
      j["timestamp"] = r.timestamp;
      j["topic"] = r.topic;
      out << j.dump() << '\n';
    }
    return;
  }
  for (std::size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
  out << '\n';
  for (const auto& r : records) {
    out << csv_escape(r.id) << ',' << csv_escape(r.comment_text) << ',' << csv_escape(r.reply_text) << ','
        << csv_escape(r.comment_author) << ',' << csv_escape(r.reply_author) << ',' << to_string(r.label)
        << ',' << r.timestamp << ',' << csv_escape(r.topic) << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const std::vector<InteractionRecord>& records,
                   DatasetFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset '" + path.string() + "'");
  write_dataset(out, records, format);
}

DatasetSplit temporal_split(const std::vector<InteractionRecord>& records, SplitRatios ratios) {
  if (records.empty()) throw std::invalid_argument("temporal_split: empty input");
  for (double r : ratios) {
    if (!(r > 0.0)) throw std::invalid_argument("temporal_split: ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw std::invalid_argument("temporal_split: ratios must sum to 1");

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].timestamp < records[b].timestamp;
  });

  const auto n = static_cast<double>(records.size());
  // The small slack keeps products such as 0.29·100 from flooring one short.
  const auto n_train = static_cast<std::size_t>(std::floor(ratios[0] * n + 1e-9));
  const auto n_dev = static_cast<std::size_t>(std::floor(ratios[1] * n + 1e-9));
  if (n_train == 0 || n_dev == 0 || n_train + n_dev >= records.size())
    throw std::invalid_argument("temporal_split: a split is empty after rounding (N=" +
                                std::to_string(records.size()) + ")");

  DatasetSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_train ? split.train : (i < n_train + n_dev ? split.dev : split.test);
    dst.push_back(records[order[i]]);
  }
  return split;
}

DatasetSplit temporal_split_per_topic(const std::vector<InteractionRecord>& records, SplitRatios ratios) {
  if (records.empty()) throw std::invalid_argument("temporal_split: empty input");
  DatasetSplit out;
  for (const auto& topic : topics_of(records)) {
    std::vector<InteractionRecord> part;
    std::copy_if(records.begin(), records.end(), std::back_inserter(part),
                 [&](const InteractionRecord& r) { return r.topic == topic; });
    auto s = temporal_split(part, ratios);
    out.train.insert(out.train.end(), s.train.begin(), s.train.end());
    out.dev.insert(out.dev.end(), s.dev.begin(), s.dev.end());
    out.test.insert(out.test.end(), s.test.begin(), s.test.end());
  }
  return out;
}

std::vector<std::string> topics_of(const std::vector<InteractionRecord>& records) {
  std::vector<std::string> topics;
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (seen.insert(r.topic).second) topics.push_back(r.topic);
  }
  return topics;
}

}  // namespace relstance
