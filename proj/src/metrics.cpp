#include "relstance/metrics.hpp"

#include <stdexcept>
#include <vector>

namespace relstance {

namespace {

MetricsReport empty_report(std::string key) {
  MetricsReport r;
  r.key = std::move(key);
  return r;
}

}  // namespace

MetricsReport compute_metrics(std::span<const Stance> preds, std::span<const Stance> golds, std::string key) {
  if (preds.size() != golds.size()) throw std::invalid_argument("compute_metrics: length mismatch");
  if (preds.empty()) throw std::invalid_argument("compute_metrics: empty input");

  MetricsReport r;
  r.key = std::move(key);
  r.total = preds.size();
  for (std::size_t i = 0; i < preds.size(); ++i) ++r.confusion[class_index(golds[i])][class_index(preds[i])];

  std::size_t correct = 0;
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < kStanceCount; ++c) {
    std::size_t predicted = 0;
    std::size_t actual = 0;
    for (std::size_t o = 0; o < kStanceCount; ++o) {
      predicted += r.confusion[o][c];
      actual += r.confusion[c][o];
    }
    const auto tp = static_cast<double>(r.confusion[c][c]);
    correct += r.confusion[c][c];
    auto& m = r.per_class[c];
    m.support = actual;
    m.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? tp / static_cast<double>(actual) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    f1_sum += m.f1;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  r.macro_f1 = f1_sum / static_cast<double>(kStanceCount);
  return r;
}

std::size_t length_bucket(std::size_t tokens) noexcept {
  if (tokens <= 100) return 0;
  if (tokens <= 200) return 1;
  return 2;
}

std::array<MetricsReport, 3> bucket_by_length(std::span<const std::size_t> token_counts,
                                              std::span<const Stance> preds, std::span<const Stance> golds) {
  if (token_counts.size() != preds.size() || preds.size() != golds.size())
    throw std::invalid_argument("bucket_by_length: length mismatch");
  std::array<std::vector<Stance>, 3> bp;
  std::array<std::vector<Stance>, 3> bg;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto b = length_bucket(token_counts[i]);
    bp[b].push_back(preds[i]);
    bg[b].push_back(golds[i]);
  }
  std::array<MetricsReport, 3> out;
  for (std::size_t b = 0; b < 3; ++b)
    out[b] = bp[b].empty() ? empty_report(kLengthBuckets[b]) : compute_metrics(bp[b], bg[b], kLengthBuckets[b]);
  return out;
}

MetricsReport average_reports(std::span<const MetricsReport> reports, std::string key) {
  if (reports.empty()) throw std::invalid_argument("average_reports: no reports");
  MetricsReport avg;
  avg.key = std::move(key);
  const auto n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    avg.accuracy += r.accuracy / n;
    avg.macro_f1 += r.macro_f1 / n;
    avg.total += r.total;
    for (std::size_t c = 0; c < kStanceCount; ++c) {
      avg.per_class[c].precision += r.per_class[c].precision / n;
      avg.per_class[c].recall += r.per_class[c].recall / n;
      avg.per_class[c].f1 += r.per_class[c].f1 / n;
      avg.per_class[c].support += r.per_class[c].support;
      for (std::size_t o = 0; o < kStanceCount; ++o) avg.confusion[c][o] += r.confusion[c][o];
    }
  }
  return avg;
}

}  // namespace relstance
