#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace relstance {

/// Stance of the reply towards the comment. The ordinal is the class index used
/// by the classifier and the metrics.
enum class Stance : std::uint8_t { agree = 0, disagree = 1, neutral = 2 };

inline constexpr std::size_t kStanceCount = 3;
inline constexpr std::array<Stance, kStanceCount> kAllStances{Stance::agree, Stance::disagree,
                                                              Stance::neutral};

std::string_view to_string(Stance s) noexcept;
std::optional<Stance> parse_stance(std::string_view s) noexcept;
/// agree = +1, disagree = -1, neutral = 0.
int stance_sign(Stance s) noexcept;
inline std::size_t class_index(Stance s) noexcept { return static_cast<std::size_t>(s); }

struct InteractionRecord {
  std::string id;
  std::string comment_text;
  std::string reply_text;
  std::string comment_author;
  std::string reply_author;
  Stance label = Stance::neutral;
  std::int64_t timestamp = 0;
  std::string topic;

  bool is_self_reply() const noexcept { return comment_author == reply_author; }
  bool operator==(const InteractionRecord&) const = default;
};

enum class DatasetFormat { jsonl, csv };

std::optional<DatasetFormat> parse_dataset_format(std::string_view s) noexcept;
/// Picks the format from the file extension (.csv → csv, anything else → jsonl).
DatasetFormat format_from_extension(const std::filesystem::path& path);

/// Reads records in file order. Rows without an `id` get their 0-based row index.
/// Throws ParseError naming the offending row.
std::vector<InteractionRecord> parse_dataset(const std::filesystem::path& path, DatasetFormat format);
std::vector<InteractionRecord> parse_dataset(std::istream& in, DatasetFormat format);

void write_dataset(std::ostream& out, const std::vector<InteractionRecord>& records, DatasetFormat format);
void write_dataset(const std::filesystem::path& path, const std::vector<InteractionRecord>& records,
                   DatasetFormat format);

struct DatasetSplit {
  std::vector<InteractionRecord> train;
  std::vector<InteractionRecord> dev;
  std::vector<InteractionRecord> test;

  std::size_t size() const noexcept { return train.size() + dev.size() + test.size(); }
};

using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kDefaultSplit{0.8, 0.1, 0.1};

/// Stable sort by timestamp, then cut ⌊r0·N⌋ / ⌊r1·N⌋ / remainder.
DatasetSplit temporal_split(const std::vector<InteractionRecord>& records, SplitRatios ratios = kDefaultSplit);

/// Applies temporal_split to each topic separately and concatenates the parts
/// (topics in order of first appearance). Boundaries hold per topic only.
DatasetSplit temporal_split_per_topic(const std::vector<InteractionRecord>& records,
                                      SplitRatios ratios = kDefaultSplit);

/// Topics in order of first appearance.
std::vector<std::string> topics_of(const std::vector<InteractionRecord>& records);

}  // namespace relstance
