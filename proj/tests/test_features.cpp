#include "doctest.h"
#include "hebr/features.hpp"
#include "hebr/rng.hpp"

using hebr::Mat;
using hebr::Vec;

namespace {

// one-user stream with hand-picked channels
Mat stream_with(const std::vector<double>& total, double ntl_value) {
  Mat s(static_cast<Eigen::Index>(total.size()), hebr::kNumChannels);
  for (std::size_t t = 0; t < total.size(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    s(ti, hebr::kUsageTotal) = total[t];
    s(ti, hebr::kUsageOnPeak) = 0.4 * total[t];
    s(ti, hebr::kUsageOffPeak) = 0.6 * total[t];
    s(ti, hebr::kNtl) = ntl_value;
    s(ti, hebr::kTempMax) = 25.0;
    s(ti, hebr::kTempMin) = 15.0;
  }
  return s;
}

}  // namespace

TEST_CASE("feature schema is frozen at 22 named entries") {
  const auto& names = hebr::feature_names();
  CHECK(names.size() == hebr::kFeatureCount);
  CHECK(hebr::kFeatureCount == 22);
  CHECK(names[0] == "usage_total_mean");
  CHECK(names[2] == "usage_total_slope");
  CHECK(names[9] == "ntl_mean");
  CHECK(names[18] == "usage_ntl_euclidean");
  CHECK(names[21] == "usage_temp_dtw");
}

TEST_CASE("feature values on constructed windows") {
  SUBCASE("constant usage: all usage slopes are zero") {
    const Mat s = stream_with({5, 5, 5, 5}, 2.0);
    const auto f = hebr::extract_features(hebr::MultiSourceWindow(s, 0, 4));
    CHECK(f(2) == 0.0);  // total slope
    CHECK(f(5) == 0.0);  // on-peak slope
    CHECK(f(8) == 0.0);  // off-peak slope
    CHECK(f(0) == doctest::Approx(5.0));
    CHECK(f(1) == doctest::Approx(0.0));
  }
  SUBCASE("usage identical to NTL: both distances vanish") {
    Mat s = stream_with({3, 1, 4, 1}, 0.0);
    s.col(hebr::kNtl) = s.col(hebr::kUsageTotal);
    const auto f = hebr::extract_features(hebr::MultiSourceWindow(s, 0, 4));
    CHECK(f(18) == 0.0);
    CHECK(f(19) == 0.0);
  }
  SUBCASE("total-usage slope oracle") {
    const Mat s = stream_with({0, 2, 1, 3}, 2.0);
    const auto f = hebr::extract_features(hebr::MultiSourceWindow(s, 0, 4));
    CHECK(f(2) == doctest::Approx(0.8));
  }
  SUBCASE("identity fields are irrelevant: features depend on the window only") {
    const Mat s = stream_with({1, 2, 3, 4}, 2.0);
    const auto a = hebr::extract_features(hebr::MultiSourceWindow(s, 0, 4));
    const auto b = hebr::extract_features(hebr::MultiSourceWindow(s, 0, 4));
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("logistic regression separates a one-dimensional fixture") {
  const int n = 20;
  Mat x(n, 1);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    const bool pos = i % 2 == 0;
    x(i, 0) = pos ? 1.0 : -1.0;
    y[static_cast<std::size_t>(i)] = pos ? 1 : 0;
  }
  const auto model = hebr::logistic_train(x, y, 1.0, 200, 0.5);
  const Vec p = hebr::logistic_predict_all(model, x);
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    if ((p(i) >= 0.5) == (y[static_cast<std::size_t>(i)] == 1)) ++correct;
  }
  CHECK(correct == n);  // accuracy 1.0 within 200 steps
}

TEST_CASE("zero weights predict one half") {
  hebr::LogisticModel m;
  m.w = Vec::Zero(3);
  m.b = 0.0;
  m.feat_stats.assign(3, {0.0, 1.0});
  Vec x(3);
  x << 4.0, -2.0, 100.0;
  CHECK(hebr::logistic_predict(m, x) == doctest::Approx(0.5));
}

TEST_CASE("duplicated feature columns are redundant in the model class") {
  // weight w on one column predicts identically to (w/2, w/2) on the column
  // duplicated, for any input
  hebr::LogisticModel single;
  single.w = Vec::Constant(1, 0.8);
  single.b = -0.2;
  single.feat_stats.assign(1, {1.0, 2.0});

  hebr::LogisticModel dup;
  dup.w = Vec::Constant(2, 0.4);
  dup.b = -0.2;
  dup.feat_stats.assign(2, {1.0, 2.0});

  hebr::Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x1(1);
    x1 << rng.normal(0.0, 3.0);
    Vec x2(2);
    x2 << x1(0), x1(0);
    CHECK(hebr::logistic_predict(single, x1) ==
          doctest::Approx(hebr::logistic_predict(dup, x2)).epsilon(1e-12));
  }
}

TEST_CASE("single-class training is rejected") {
  Mat x(4, 1);
  x.setOnes();
  CHECK_THROWS_AS(hebr::logistic_train(x, {1, 1, 1, 1}, 1.0), hebr::data_error);
  CHECK_THROWS_AS(hebr::logistic_train(x, {0, 0, 0, 0}, 1.0), hebr::data_error);
}
