#include "hebr/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "hebr/csv.hpp"
#include "hebr/errors.hpp"

namespace hebr {

ConfusionCounts confusion(const Vec& scores, const std::vector<int>& labels, double threshold) {
  if (static_cast<std::size_t>(scores.size()) != labels.size()) {
    throw shape_error("confusion: scores/labels length mismatch");
  }
  ConfusionCounts c;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const bool predicted = scores(i) >= threshold;
    const bool actual = labels[static_cast<std::size_t>(i)] != 0;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double fbeta(double precision, double recall, double beta) {
  if (precision <= 0.0 && recall <= 0.0) return 0.0;
  const double b2 = beta * beta;
  return (1.0 + b2) * precision * recall / (b2 * precision + recall);
}

MetricsReport make_report(const Vec& scores, const std::vector<int>& labels, double threshold) {
  MetricsReport r;
  r.counts = confusion(scores, labels, threshold);
  r.threshold = threshold;
  const auto& c = r.counts;
  r.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  r.recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  r.f1 = fbeta(r.precision, r.recall, 1.0);
  r.f05 = fbeta(r.precision, r.recall, 0.5);
  return r;
}

double select_threshold_max_f05(const Vec& scores, const std::vector<int>& labels) {
  std::vector<double> candidates(scores.data(), scores.data() + scores.size());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  candidates.push_back(1.0 + 1e-9);  // "predict nothing" fallback
  double best_threshold = 0.5;
  double best_f05 = -1.0;
  for (const double t : candidates) {
    const MetricsReport r = make_report(scores, labels, t);
    if (r.f05 > best_f05 + 1e-12) {
      best_f05 = r.f05;
      best_threshold = t;
    }
  }
  return best_threshold;
}

void write_metrics_csv(const MetricsReport& r, const std::string& path) {
  CsvWriter w(path, {"threshold", "tp", "fp", "fn", "tn", "precision", "recall", "f1", "f05"});
  w.cell(r.threshold);
  w.cell(r.counts.tp);
  w.cell(r.counts.fp);
  w.cell(r.counts.fn);
  w.cell(r.counts.tn);
  w.cell(r.precision);
  w.cell(r.recall);
  w.cell(r.f1);
  w.cell(r.f05);
  w.end_row();
}

std::string metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %9s %9s %9s %9s %6s %6s %6s %6s\n", "run",
                "precision", "recall", "f1", "f0.5", "tp", "fp", "fn", "tn");
  out << line;
  for (const auto& [name, r] : rows) {
    std::snprintf(line, sizeof(line), "%-28s %9.4f %9.4f %9.4f %9.4f %6lld %6lld %6lld %6lld\n",
                  name.c_str(), r.precision, r.recall, r.f1, r.f05,
                  static_cast<long long>(r.counts.tp), static_cast<long long>(r.counts.fp),
                  static_cast<long long>(r.counts.fn), static_cast<long long>(r.counts.tn));
    out << line;
  }
  return out.str();
}

LocalizationResult attention_localization(const std::vector<Sample>& samples, const Vec& scores,
                                          const Mat& alpha, const std::vector<TheftInterval>& gt,
                                          double threshold) {
  LocalizationResult result;
  if (alpha.size() == 0) return result;
  double ratio_sum = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.label != 1 || scores(static_cast<Eigen::Index>(i)) < threshold) continue;
    const int T = s.window_days;
    std::vector<bool> theft(static_cast<std::size_t>(T), false);
    int k = 0;
    for (const auto& iv : gt) {
      if (iv.user_idx != s.user_idx) continue;
      const int lo = std::max(iv.start_day, s.start_day);
      const int hi = std::min(iv.end_day, s.start_day + T);
      for (int day = lo; day < hi; ++day) {
        auto flag = theft[static_cast<std::size_t>(day - s.start_day)];
        if (!flag) {
          flag = true;
          ++k;
        }
      }
    }
    if (k == 0 || k == T) continue;
    // earliest run of k consecutive theft-free steps
    int span_start = -1, run = 0;
    for (int t = 0; t < T; ++t) {
      run = theft[static_cast<std::size_t>(t)] ? 0 : run + 1;
      if (run == k) {
        span_start = t - k + 1;
        break;
      }
    }
    if (span_start < 0) continue;
    double theft_mass = 0.0, span_mass = 0.0;
    for (int t = 0; t < T; ++t) {
      if (theft[static_cast<std::size_t>(t)]) theft_mass += alpha(static_cast<Eigen::Index>(i), t);
    }
    for (int t = span_start; t < span_start + k; ++t) {
      span_mass += alpha(static_cast<Eigen::Index>(i), t);
    }
    ratio_sum += theft_mass / std::max(span_mass, 1e-12);
    ++used;
  }
  if (used > 0) {
    result.available = true;
    result.mean_ratio = ratio_sum / static_cast<double>(used);
    result.true_positives_used = used;
  }
  return result;
}

}  // namespace hebr
