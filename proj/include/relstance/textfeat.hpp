#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "relstance/ingest.hpp"
#include "relstance/linalg.hpp"

namespace relstance {

/// Lowercased tokens split on ASCII whitespace and punctuation. Bytes ≥ 0x80
/// are kept as token characters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// Signed feature hashing: comment tokens into buckets [0, ⌊dim/2⌋), reply tokens
/// into [⌊dim/2⌋, dim) with a salted hash, then L2 normalization. No tokens → zeros.
Vector hash_featurize(std::string_view comment, std::string_view reply, std::size_t dim);

/// Whitespace-delimited token count of comment plus reply.
std::size_t whitespace_token_count(std::string_view comment, std::string_view reply);

/// Example id → fixed-width float vector, in insertion order.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  /// Throws on duplicate id, wrong length or non-finite values.
  void add(std::string id, std::vector<float> values);
  const std::vector<float>* find(std::string_view id) const;

  bool operator==(const EmbeddingTable&) const = default;

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::vector<float>> rows_;
};

/// `dim=<d> count=<n>` header, then n lines `id<TAB>f1,…,fd`. Errors name the 1-based line.
EmbeddingTable load_embedding_table(const std::filesystem::path& path);
EmbeddingTable read_embedding_table(std::istream& in);
/// Shortest round-trip float formatting, so reloading is bitwise exact.
void write_embedding_table(std::ostream& out, const EmbeddingTable& table);
void write_embedding_table(const std::filesystem::path& path, const EmbeddingTable& table);

/// Hash-featurized table for a dataset (values stored at float precision).
EmbeddingTable featurize_records(const std::vector<InteractionRecord>& records, std::size_t dim);

/// Where text vectors come from: the built-in featurizer or a loaded table.
class TextFeatureSource {
 public:
  static TextFeatureSource hashing(std::size_t dim);
  static TextFeatureSource table(EmbeddingTable table);

  std::size_t dim() const noexcept;
  bool is_hashing() const noexcept { return !table_.has_value(); }
  /// Throws std::out_of_range if a table lacks the record id.
  Vector features(const InteractionRecord& record) const;
  bool has(const InteractionRecord& record) const;

 private:
  std::size_t hash_dim_ = 0;
  std::optional<EmbeddingTable> table_;
};

}  // namespace relstance
