#include "hebr/features.hpp"

#include <cmath>

#include "hebr/csv.hpp"
#include "hebr/errors.hpp"

namespace hebr {

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = {
      "usage_total_mean",   "usage_total_var",   "usage_total_slope",
      "usage_onpeak_mean",  "usage_onpeak_var",  "usage_onpeak_slope",
      "usage_offpeak_mean", "usage_offpeak_var", "usage_offpeak_slope",
      "ntl_mean",           "ntl_var",           "ntl_slope",
      "tmax_mean",          "tmax_var",          "tmax_slope",
      "tmin_mean",          "tmin_var",          "tmin_slope",
      "usage_ntl_euclidean", "usage_ntl_dtw",
      "usage_temp_euclidean", "usage_temp_dtw",
  };
  return names;
}

Eigen::Matrix<double, kFeatureCount, 1> extract_features(const MultiSourceWindow& w) {
  Eigen::Matrix<double, kFeatureCount, 1> f;
  int k = 0;
  for (const int ch : {kUsageTotal, kUsageOnPeak, kUsageOffPeak, kNtl, kTempMax, kTempMin}) {
    const auto series = w.channel(ch);
    f(k++) = series_mean(series);
    f(k++) = series_variance(series);
    f(k++) = ols_slope(series);
  }
  const Vec usage = w.channel(kUsageTotal);
  const Vec ntl = w.channel(kNtl);
  f(k++) = euclidean(usage, ntl);
  f(k++) = dtw(usage, ntl);
  const Vec temp = w.temp_avg();
  const Vec usage_z = zscore_apply(usage, zscore_fit(usage));
  const Vec temp_z = zscore_apply(temp, zscore_fit(temp));
  f(k++) = euclidean(usage_z, temp_z);
  f(k++) = dtw(usage_z, temp_z);
  return f;
}

Mat feature_matrix(const Dataset& d, const std::vector<Sample>& samples) {
  Mat out(static_cast<Eigen::Index>(samples.size()), kFeatureCount);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = extract_features(d.window(samples[i])).transpose();
  }
  return out;
}

void write_feature_csv(const Dataset& d, const std::vector<Sample>& samples,
                       const std::string& path) {
  std::vector<std::string> header = {"user_id", "window_start", "label"};
  for (const auto& n : feature_names()) header.push_back(n);
  CsvWriter w(path, header);
  const Mat features = feature_matrix(d, samples);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    w.cell(d.users[static_cast<std::size_t>(s.user_idx)].user_id);
    w.cell(static_cast<std::int64_t>(s.start_day));
    w.cell(static_cast<std::int64_t>(s.label));
    for (int j = 0; j < kFeatureCount; ++j) {
      w.cell(features(static_cast<Eigen::Index>(i), j));
    }
    w.end_row();
  }
}

LogisticModel logistic_train(const Mat& features, const std::vector<int>& labels,
                             double pos_weight, int iterations, double step) {
  const auto n = features.rows();
  if (n < 1 || static_cast<std::size_t>(n) != labels.size()) {
    throw shape_error("logistic_train: features/labels mismatch");
  }
  std::int64_t pos = 0;
  for (int y : labels) pos += y;
  if (pos == 0 || pos == n) {
    throw data_error("logistic_train: both classes must be present");
  }

  LogisticModel m;
  m.feat_stats.resize(static_cast<std::size_t>(features.cols()));
  Mat x = features;
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    m.feat_stats[static_cast<std::size_t>(j)] = zscore_fit(features.col(j));
    x.col(j) = zscore_apply(features.col(j), m.feat_stats[static_cast<std::size_t>(j)]);
  }

  m.w = Vec::Zero(features.cols());
  m.b = 0.0;
  Vec weight(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    weight(i) = labels[static_cast<std::size_t>(i)] ? pos_weight : 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < iterations; ++it) {
    const Vec z = (x * m.w).array() + m.b;
    const Vec p = (1.0 + (-z.array()).exp()).inverse();
    Vec residual(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      residual(i) = weight(i) * (p(i) - labels[static_cast<std::size_t>(i)]);
    }
    const Vec gw = x.transpose() * residual * inv_n;
    const double gb = residual.sum() * inv_n;
    m.w -= step * gw;
    m.b -= step * gb;
  }
  return m;
}

double logistic_predict(const LogisticModel& m, const Eigen::Ref<const Vec>& features) {
  double z = m.b;
  for (Eigen::Index j = 0; j < m.w.size(); ++j) {
    const auto& st = m.feat_stats[static_cast<std::size_t>(j)];
    const double v = st.std > 0 ? (features(j) - st.mean) / st.std : features(j) - st.mean;
    z += m.w(j) * v;
  }
  return 1.0 / (1.0 + std::exp(-z));
}

Vec logistic_predict_all(const LogisticModel& m, const Mat& features) {
  Vec out(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out(i) = logistic_predict(m, features.row(i).transpose());
  }
  return out;
}

}  // namespace hebr
