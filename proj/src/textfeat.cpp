#include "relstance/textfeat.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "relstance/errors.hpp"

namespace relstance {

namespace {

constexpr std::uint64_t kReplySalt = 0x9e3779b97f4a7c15ULL;

bool is_token_char(unsigned char c) {
  return c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

void accumulate(std::span<double> v, std::size_t offset, std::size_t width, std::string_view text,
                std::uint64_t basis, bool use_sign) {
  for (const auto& tok : tokenize(text)) {
    const std::uint64_t h = fnv1a64(tok, basis);
    const double sign = use_sign && (h >> 63) ? -1.0 : 1.0;
    v[offset + h % width] += sign;
  }
}

std::size_t parse_header_field(std::string_view field, std::string_view key) {
  if (field.substr(0, key.size()) != key) throw ParseError(1, "malformed header, expected '" + std::string(key) + "'");
  field.remove_prefix(key.size());
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || end != field.data() + field.size() || field.empty())
    throw ParseError(1, "malformed header value for '" + std::string(key) + "'");
  return v;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_char(c)) {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vector hash_featurize(std::string_view comment, std::string_view reply, std::size_t dim) {
  if (dim < 8) throw std::invalid_argument("hash_featurize: dim must be at least 8");
  const std::size_t half = dim / 2;
  Vector v(dim, 0.0);
  const std::uint64_t reply_basis = 0xcbf29ce484222325ULL ^ kReplySalt;
  accumulate(v, 0, half, comment, 0xcbf29ce484222325ULL, true);
  accumulate(v, half, dim - half, reply, reply_basis, true);
  double norm = std::sqrt(squared_norm(v));
  if (norm == 0.0) {
    // Signed buckets can cancel exactly; fall back to unsigned counts so any
    // tokenized input still maps to a unit vector.
    accumulate(v, 0, half, comment, 0xcbf29ce484222325ULL, false);
    accumulate(v, half, dim - half, reply, reply_basis, false);
    norm = std::sqrt(squared_norm(v));
    if (norm == 0.0) return v;
  }
  for (auto& x : v) x /= norm;
  return v;
}

std::size_t whitespace_token_count(std::string_view comment, std::string_view reply) {
  auto count = [](std::string_view s) {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : s) {
      const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
      if (!space && !in_token) ++n;
      in_token = !space;
    }
    return n;
  };
  return count(comment) + count(reply);
}

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("embedding table dim must be positive");
}

void EmbeddingTable::add(std::string id, std::vector<float> values) {
  if (values.size() != dim_)
    throw std::invalid_argument("vector for '" + id + "' has " + std::to_string(values.size()) + " values, expected " +
                                std::to_string(dim_));
  for (float f : values) {
    if (!std::isfinite(f)) throw std::invalid_argument("non-finite value in vector for '" + id + "'");
  }
  if (rows_.contains(id)) throw std::invalid_argument("duplicate id '" + id + "'");
  rows_.emplace(id, std::move(values));
  ids_.push_back(std::move(id));
}

const std::vector<float>* EmbeddingTable::find(std::string_view id) const {
  auto it = rows_.find(std::string(id));
  return it == rows_.end() ? nullptr : &it->second;
}

EmbeddingTable read_embedding_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto space = line.find(' ');
  if (space == std::string::npos) throw ParseError(1, "malformed header, expected 'dim=<d> count=<n>'");
  const std::size_t dim = parse_header_field(std::string_view(line).substr(0, space), "dim=");
  const std::size_t count = parse_header_field(std::string_view(line).substr(space + 1), "count=");
  if (dim == 0) throw ParseError(1, "dim must be positive");

  EmbeddingTable table(dim);
  std::size_t lineno = 1;
  std::vector<float> values;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(lineno, "expected '<id>\\t<values>'");
    std::string id = line.substr(0, tab);
    values.clear();
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      float f = 0.0f;
      auto [stop, ec] = std::from_chars(p, comma, f);
      if (ec != std::errc{} || stop != comma || p == comma)
        throw ParseError(lineno, "malformed value '" + std::string(p, comma) + "'");
      values.push_back(f);
      p = comma + 1;
    }
    if (values.size() != dim)
      throw ParseError(lineno, "row '" + id + "' has " + std::to_string(values.size()) + " values, header says dim=" +
                                   std::to_string(dim));
    try {
      table.add(std::move(id), values);
    } catch (const std::invalid_argument& e) {
      throw ParseError(lineno, e.what());
    }
  }
  if (table.size() != count)
    throw ParseError(0, "header says count=" + std::to_string(count) + " but file has " +
                            std::to_string(table.size()) + " rows");
  return table;
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open embedding table '" + path.string() + "'");
  return read_embedding_table(in);
}

void write_embedding_table(std::ostream& out, const EmbeddingTable& table) {
  out << "dim=" << table.dim() << " count=" << table.size() << '\n';
  char buf[64];
  for (const auto& id : table.ids()) {
    out << id << '\t';
    const auto& row = *table.find(id);
    for (std::size_t i = 0; i < row.size(); ++i) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, row[i]);
      if (i) out << ',';
      out.write(buf, end - buf);
    }
    out << '\n';
  }
}

void write_embedding_table(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write embedding table '" + path.string() + "'");
  write_embedding_table(out, table);
}

EmbeddingTable featurize_records(const std::vector<InteractionRecord>& records, std::size_t dim) {
  EmbeddingTable table(dim);
  for (const auto& r : records) {
    const auto v = hash_featurize(r.comment_text, r.reply_text, dim);
    table.add(r.id, std::vector<float>(v.begin(), v.end()));
  }
  return table;
}

TextFeatureSource TextFeatureSource::hashing(std::size_t dim) {
  if (dim < 8) throw std::invalid_argument("hash feature dim must be at least 8");
  TextFeatureSource s;
  s.hash_dim_ = dim;
  return s;
}

TextFeatureSource TextFeatureSource::table(EmbeddingTable table) {
  TextFeatureSource s;
  s.table_.emplace(std::move(table));
  return s;
}

std::size_t TextFeatureSource::dim() const noexcept { return table_ ? table_->dim() : hash_dim_; }

bool TextFeatureSource::has(const InteractionRecord& record) const {
  return !table_ || table_->find(record.id) != nullptr;
}

Vector TextFeatureSource::features(const InteractionRecord& record) const {
  if (!table_) return hash_featurize(record.comment_text, record.reply_text, hash_dim_);
  const auto* row = table_->find(record.id);
  if (!row) throw std::out_of_range("no text vector for id '" + record.id + "'");
  return Vector(row->begin(), row->end());
}

}  // namespace relstance
