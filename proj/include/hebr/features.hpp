#pragma once

#include <array>
#include <string>
#include <vector>

#include "hebr/data.hpp"
#include "hebr/types.hpp"

namespace hebr {

constexpr int kFeatureCount = 22;

/// Frozen feature schema: mean/variance/slope for each usage channel, NTL and
/// both temperature channels, then the usage-vs-NTL and usage-vs-temperature
/// distances. Order is part of the on-disk format.
const std::array<std::string, kFeatureCount>& feature_names();

/// Summary-statistic features of one sample window. Usage-vs-NTL distances
/// are taken on the raw series (same unit); usage-vs-temperature distances
/// compare the z-scored total usage against the z-scored daily average
/// temperature.
Eigen::Matrix<double, kFeatureCount, 1> extract_features(const MultiSourceWindow& w);

Mat feature_matrix(const Dataset& d, const std::vector<Sample>& samples);

void write_feature_csv(const Dataset& d, const std::vector<Sample>& samples,
                       const std::string& path);

struct LogisticModel {
  Vec w;                               // kFeatureCount
  double b = 0.0;
  std::vector<ZScoreStats> feat_stats; // train-fitted, applied before the dot product
};

/// Weighted-cross-entropy logistic regression via full-batch gradient descent
/// on z-scored features. Both classes must be present.
LogisticModel logistic_train(const Mat& features, const std::vector<int>& labels,
                             double pos_weight, int iterations = 2000, double step = 0.1);

double logistic_predict(const LogisticModel& m, const Eigen::Ref<const Vec>& features);
Vec logistic_predict_all(const LogisticModel& m, const Mat& features);

}  // namespace hebr
