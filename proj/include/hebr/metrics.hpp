#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hebr/data.hpp"
#include "hebr/types.hpp"

namespace hebr {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::int64_t total() const { return tp + fp + fn + tn; }
};

/// Predict positive iff score >= threshold.
ConfusionCounts confusion(const Vec& scores, const std::vector<int>& labels,
                          double threshold = 0.5);

/// Weighted harmonic mean of precision and recall; 0 when both are 0.
double fbeta(double precision, double recall, double beta);

struct MetricsReport {
  ConfusionCounts counts;
  double precision = 0.0, recall = 0.0, f1 = 0.0, f05 = 0.0;
  double threshold = 0.5;
};

MetricsReport make_report(const Vec& scores, const std::vector<int>& labels,
                          double threshold = 0.5);

/// Threshold maximizing F0.5 over the candidate cut points of `scores`
/// (deterministic; prefers the lowest maximizing threshold).
double select_threshold_max_f05(const Vec& scores, const std::vector<int>& labels);

void write_metrics_csv(const MetricsReport& r, const std::string& path);
std::string metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

/// Theft interval of one user, stream-day offsets, end exclusive; the end is
/// the checkpoint day.
struct TheftInterval {
  int user_idx = -1;
  int start_day = 0;
  int end_day = 0;
  double rho = 0.0;
};

struct LocalizationResult {
  bool available = false;
  double mean_ratio = 0.0;
  int true_positives_used = 0;
};

/// Mean attention mass over in-window theft days divided by the mass over an
/// equally long theft-free span of the same window, averaged over true
/// positives. Uniform attention gives exactly 1.
LocalizationResult attention_localization(const std::vector<Sample>& samples, const Vec& scores,
                                          const Mat& alpha, const std::vector<TheftInterval>& gt,
                                          double threshold = 0.5);

}  // namespace hebr
