#pragma once

// Binary classification metrics with "fake" as the positive class.

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "dccf/error.hpp"
#include "dccf/judgment.hpp"

namespace dccf {

struct MetricsReport {
  double accuracy = 0.0;
  double f1_fake = 0.0;
  double f1_real = 0.0;
  std::optional<double> auc;  // absent when the split has a single class
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const MetricsReport&) const = default;
};

/// F1 = 2tp / (2tp + fp + fn); 0 when the class is neither present nor predicted.
inline double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

/// Mann-Whitney rank statistic with tied scores sharing their average rank,
/// which counts every tied (fake, real) pair as one half.
inline std::optional<double> auc_score(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw ConfigError("auc: scores/labels size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j averaged
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == Label::fake) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double p = static_cast<double>(n_pos);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(n_neg));
}

inline MetricsReport compute_metrics(std::span<const double> prob_fake, std::span<const Label> labels) {
  if (prob_fake.size() != labels.size()) throw ConfigError("metrics: scores/labels size mismatch");
  if (prob_fake.empty()) throw DataError("metrics: empty evaluation split");
  MetricsReport r;
  for (std::size_t i = 0; i < prob_fake.size(); ++i) {
    const bool predicted_fake = label_for(prob_fake[i]) == Label::fake;
    const bool is_fake = labels[i] == Label::fake;
    if (predicted_fake && is_fake) ++r.tp;
    else if (predicted_fake) ++r.fp;
    else if (is_fake) ++r.fn;
    else ++r.tn;
  }
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.total());
  r.f1_fake = f1_score(r.tp, r.fp, r.fn);
  r.f1_real = f1_score(r.tn, r.fn, r.fp);
  r.auc = auc_score(prob_fake, labels);
  return r;
}

}  // namespace dccf
