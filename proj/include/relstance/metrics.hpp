#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>

#include "relstance/ingest.hpp"

namespace relstance {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;

  bool operator==(const ClassMetrics&) const = default;
};

struct MetricsReport {
  std::string key;  // "all", a topic, or a length bucket
  std::array<ClassMetrics, kStanceCount> per_class{};
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::size_t total = 0;
  /// confusion[gold][pred]
  std::array<std::array<std::size_t, kStanceCount>, kStanceCount> confusion{};

  const ClassMetrics& of(Stance s) const { return per_class[class_index(s)]; }
  bool operator==(const MetricsReport&) const = default;
};

/// Per-class P/R/F1 with 0/0 := 0, accuracy, macro-F1. Throws on empty or mismatched input.
MetricsReport compute_metrics(std::span<const Stance> preds, std::span<const Stance> golds, std::string key = "all");

inline constexpr std::array<const char*, 3> kLengthBuckets{"(0,100]", "(100,200]", ">200"};

/// Bucket index for a token count; counts ≤ 100 (including 0) go to the first bucket.
std::size_t length_bucket(std::size_t tokens) noexcept;

/// One report per length bucket; empty buckets report zero support.
std::array<MetricsReport, 3> bucket_by_length(std::span<const std::size_t> token_counts,
                                              std::span<const Stance> preds, std::span<const Stance> golds);

/// Unweighted mean of accuracy, macro-F1 and per-class P/R/F1; supports and confusion are summed.
MetricsReport average_reports(std::span<const MetricsReport> reports, std::string key = "average");

}  // namespace relstance
