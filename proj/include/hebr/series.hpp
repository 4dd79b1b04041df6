#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "hebr/errors.hpp"
#include "hebr/types.hpp"

// Numeric primitives over real-valued sequences. All functions are pure and
// take any dense Eigen vector expression; abscissae are implicit 0..n-1.

namespace hebr {

template <typename D>
double series_mean(const Eigen::DenseBase<D>& s) {
  if (s.size() == 0) throw shape_error("mean of empty series");
  return s.derived().template cast<double>().mean();
}

/// Population variance (divide by n).
template <typename D>
double series_variance(const Eigen::DenseBase<D>& s) {
  if (s.size() == 0) throw shape_error("variance of empty series");
  const auto v = s.derived().template cast<double>().eval();
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size());
}

/// Least-squares slope of s against 0..n-1. Constant series give exactly 0.
template <typename D>
double ols_slope(const Eigen::DenseBase<D>& s) {
  const auto n = s.size();
  if (n < 2) throw shape_error("ols_slope needs at least 2 points");
  const auto y = s.derived().template cast<double>().eval();
  const double xbar = static_cast<double>(n - 1) / 2.0;
  const double ybar = y.mean();
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - xbar;
    num += dx * (y(i) - ybar);
    den += dx * dx;
  }
  return num / den;
}

template <typename DA, typename DB>
double euclidean(const Eigen::DenseBase<DA>& a, const Eigen::DenseBase<DB>& b) {
  if (a.size() != b.size()) throw shape_error("euclidean: length mismatch");
  return std::sqrt((a.derived().template cast<double>() - b.derived().template cast<double>())
                       .array()
                       .square()
                       .sum());
}

/// Dynamic time warping with absolute-difference local cost and the standard
/// match/insert/delete step pattern; no warping-window constraint.
template <typename DA, typename DB>
double dtw(const Eigen::DenseBase<DA>& a, const Eigen::DenseBase<DB>& b) {
  const Eigen::Index n = a.size(), m = b.size();
  if (n == 0 || m == 0) throw shape_error("dtw: empty series");
  const auto av = a.derived().template cast<double>().eval();
  const auto bv = b.derived().template cast<double>().eval();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // one rolling row of the accumulated-cost table
  std::vector<double> prev(static_cast<std::size_t>(m) + 1, inf);
  std::vector<double> cur(static_cast<std::size_t>(m) + 1, inf);
  prev[0] = 0.0;
  for (Eigen::Index i = 1; i <= n; ++i) {
    cur[0] = inf;
    for (Eigen::Index j = 1; j <= m; ++j) {
      const double cost = std::abs(av(i - 1) - bv(j - 1));
      cur[j] = cost + std::min({prev[j - 1], prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[static_cast<std::size_t>(m)];
}

/// Order-1 Wasserstein distance between two empirical 1-D distributions,
/// computed exactly from the coupled quantile functions. Handles unequal
/// sample counts; for equal counts it reduces to the mean absolute
/// difference of the sorted samples.
template <typename DA, typename DB>
double wasserstein1d(const Eigen::DenseBase<DA>& a, const Eigen::DenseBase<DB>& b) {
  const Eigen::Index n = a.size(), m = b.size();
  if (n == 0 || m == 0) throw shape_error("wasserstein1d: empty sample set");
  std::vector<double> xs(static_cast<std::size_t>(n));
  std::vector<double> ys(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)] = a.derived()(i);
  for (Eigen::Index j = 0; j < m; ++j) ys[static_cast<std::size_t>(j)] = b.derived()(j);
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  // Integrate |F_a - F_b| over the merged support.
  double total = 0.0;
  std::size_t i = 0, j = 0;
  double prev = 0.0;
  bool have_prev = false;
  while (i < xs.size() || j < ys.size()) {
    const double x = (j >= ys.size() || (i < xs.size() && xs[i] <= ys[j])) ? xs[i] : ys[j];
    if (have_prev) {
      const double fa = static_cast<double>(i) / static_cast<double>(n);
      const double fb = static_cast<double>(j) / static_cast<double>(m);
      total += std::abs(fa - fb) * (x - prev);
    }
    while (i < xs.size() && xs[i] == x) ++i;
    while (j < ys.size() && ys[j] == x) ++j;
    prev = x;
    have_prev = true;
  }
  return total;
}

struct ZScoreStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

template <typename D>
ZScoreStats zscore_fit(const Eigen::DenseBase<D>& s) {
  if (s.size() == 0) throw shape_error("zscore_fit of empty series");
  return ZScoreStats{series_mean(s), std::sqrt(series_variance(s))};
}

/// Centers and scales; a zero std falls back to centering only.
template <typename D>
Vec zscore_apply(const Eigen::DenseBase<D>& s, const ZScoreStats& stats) {
  Vec out = s.derived().template cast<double>();
  out.array() -= stats.mean;
  if (stats.std > 0.0) out /= stats.std;
  return out;
}

}  // namespace hebr
