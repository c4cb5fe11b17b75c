#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relstance/protocol.hpp"

namespace relstance {

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view help;
};

/// Every tunable, hyphenated, in display order.
std::span<const ConfigKey> config_keys() noexcept;

/// Resolved key→value settings. Layers: defaults < config file < RELSTANCE_* env < flags.
class RunConfig {
 public:
  RunConfig();

  static bool is_known(std::string_view key) noexcept;
  /// RELSTANCE_ plus the key upper-cased with '-' → '_'.
  static std::string env_name(std::string_view key);

  /// Throws std::invalid_argument on an unknown key.
  void set(std::string_view key, std::string value);
  /// "key=value" form of set().
  void assign(std::string_view key_value);
  const std::string& get(std::string_view key) const;

  /// Flat key=value lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void apply_env(const std::function<std::optional<std::string>(const std::string&)>& lookup);
  void apply_env();

  double get_double(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  std::size_t get_size(std::string_view key) const;
  bool get_bool(std::string_view key) const;

  SplitRatios split_ratios() const;
  std::vector<std::uint64_t> seeds() const;
  /// Typed pipeline settings; throws std::invalid_argument on malformed values.
  PipelineConfig pipeline() const;

  /// Sorted "key=value" lines.
  std::string canonical() const;
  /// 16 hex digits of a 64-bit hash of canonical() without the location keys.
  std::string hash() const;

  const std::map<std::string, std::string, std::less<>>& values() const noexcept { return values_; }

  bool operator==(const RunConfig&) const = default;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Comma-separated list; empty items are dropped.
std::vector<std::string> split_list(std::string_view s);

}  // namespace relstance
