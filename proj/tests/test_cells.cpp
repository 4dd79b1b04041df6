#include <cmath>

#include "doctest.h"
#include "hebr/cells.hpp"
#include "hebr/errors.hpp"
#include "hebr/rng.hpp"

using hebr::CellKind;
using hebr::Mat;
using hebr::MatSeq;
using hebr::Vec;

namespace {

void randomize(hebr::CellParams& p, hebr::Rng& rng, double scale = 0.6) {
  for (Mat* m : {&p.Wx, &p.Wh}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.normal(0.0, scale);
  }
  for (Eigen::Index i = 0; i < p.b.size(); ++i) p.b(i) = rng.normal(0.0, scale);
}

MatSeq random_seq(hebr::Rng& rng, int T, int B, int dim) {
  MatSeq xs(static_cast<std::size_t>(T));
  for (auto& x : xs) {
    x.resize(B, dim);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  }
  return xs;
}

double weighted_sum(const MatSeq& hs, const MatSeq& weights) {
  double s = 0.0;
  for (std::size_t t = 0; t < hs.size(); ++t) s += (hs[t].array() * weights[t].array()).sum();
  return s;
}

}  // namespace

TEST_CASE("cell_step hand examples") {
  SUBCASE("zero-parameter linear cell stays at zero") {
    auto p = hebr::make_cell(CellKind::LinearRecurrent, 2, 3);
    auto s = hebr::make_state(p);
    Mat x(1, 2);
    x << 1.7, -0.3;
    hebr::cell_step(p, x, s);
    CHECK(s.h.cwiseAbs().maxCoeff() == 0.0);  // tanh(0)
  }
  SUBCASE("zero-parameter gated cell halves the previous state") {
    auto p = hebr::make_cell(CellKind::Gated, 1, 1);
    auto s = hebr::make_state(p);
    s.h(0, 0) = 1.0;
    Mat x(1, 1);
    x << 0.4;
    hebr::cell_step(p, x, s);
    // update gate 0.5, candidate tanh(0) = 0: h = 0.5*1 + 0.5*0
    CHECK(s.h(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("average pooling with identity projection is the running mean") {
    auto p = hebr::make_cell(CellKind::AveragePooling, 1, 1);
    p.Wx(0, 0) = 1.0;
    auto s = hebr::make_state(p);
    Mat x(1, 1);
    x << 1.0;
    hebr::cell_step(p, x, s);
    CHECK(s.h(0, 0) == doctest::Approx(1.0));
    x << 3.0;
    hebr::cell_step(p, x, s);
    CHECK(s.h(0, 0) == doctest::Approx(2.0));
  }
  SUBCASE("zero-parameter lstm stays at zero") {
    auto p = hebr::make_cell(CellKind::LongShortTermMemory, 2, 2);
    hebr::Rng rng(3);
    const MatSeq xs = random_seq(rng, 5, 2, 2);
    const MatSeq hs = hebr::cell_forward(p, xs);
    for (const auto& h : hs) CHECK(h.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("dimension mismatch raises a shape error") {
    auto p = hebr::make_cell(CellKind::LinearRecurrent, 3, 2);
    auto s = hebr::make_state(p);
    Mat x(1, 2);
    x.setZero();
    CHECK_THROWS_AS(hebr::cell_step(p, x, s), hebr::shape_error);
  }
}

TEST_CASE("sequence encoding: prefix property and bounded activations") {
  hebr::Rng rng(17);
  for (const CellKind kind : {CellKind::AveragePooling, CellKind::LinearRecurrent,
                              CellKind::Gated, CellKind::LongShortTermMemory}) {
    auto p = hebr::make_cell(kind, 3, 4);
    randomize(p, rng);
    const MatSeq xs = random_seq(rng, 7, 2, 3);
    const MatSeq hs = hebr::cell_forward(p, xs);
    REQUIRE(hs.size() == 7);

    // prefix property: encoding a prefix reproduces the leading rows
    const MatSeq prefix(xs.begin(), xs.begin() + 4);
    const MatSeq hp = hebr::cell_forward(p, prefix);
    for (int t = 0; t < 4; ++t) {
      CHECK((hs[static_cast<std::size_t>(t)] - hp[static_cast<std::size_t>(t)])
                .cwiseAbs()
                .maxCoeff() == 0.0);
    }

    if (kind == CellKind::LinearRecurrent || kind == CellKind::Gated ||
        kind == CellKind::LongShortTermMemory) {
      for (const auto& h : hs) {
        CHECK(h.cwiseAbs().maxCoeff() < 1.0);  // tanh / convex combination range
      }
    }

    // the streaming interface matches the batched encoder
    auto state = hebr::make_state(p, 2);
    for (std::size_t t = 0; t < xs.size(); ++t) {
      hebr::cell_step(p, xs[t], state);
      CHECK((state.h - hs[t]).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("empty sequences are rejected") {
  auto p = hebr::make_cell(CellKind::LinearRecurrent, 2, 2);
  MatSeq empty;
  CHECK_THROWS_AS(hebr::cell_forward(p, empty), hebr::shape_error);
}

TEST_CASE("scalar closed-form gradient of a one-step linear cell") {
  auto p = hebr::make_cell(CellKind::LinearRecurrent, 1, 1);
  p.Wx(0, 0) = 0.7;
  const double x = 1.3;
  MatSeq xs(1, Mat::Constant(1, 1, x));
  hebr::CellCache cache;
  hebr::cell_forward(p, xs, cache);
  MatSeq upstream(1, Mat::Constant(1, 1, 1.0));
  auto grads = hebr::make_cell(CellKind::LinearRecurrent, 1, 1);
  hebr::cell_backward(p, cache, upstream, grads);
  const double t = std::tanh(0.7 * x);
  CHECK(grads.Wx(0, 0) == doctest::Approx((1.0 - t * t) * x).epsilon(1e-12));
}

TEST_CASE("zero upstream gives zero gradients") {
  hebr::Rng rng(5);
  auto p = hebr::make_cell(CellKind::LongShortTermMemory, 2, 3);
  randomize(p, rng);
  const MatSeq xs = random_seq(rng, 4, 2, 2);
  hebr::CellCache cache;
  hebr::cell_forward(p, xs, cache);
  MatSeq upstream(4, Mat::Zero(2, 3));
  auto grads = hebr::make_cell(CellKind::LongShortTermMemory, 2, 3);
  const MatSeq dx = hebr::cell_backward(p, cache, upstream, grads);
  CHECK(grads.Wx.cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.Wh.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& d : dx) CHECK(d.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic gradients match central finite differences for every kind") {
  // T=6, dims 3 -> 4, 20 seeds per kind, step 1e-5, relative error < 1e-4
  constexpr double kStep = 1e-5;
  constexpr double kTol = 1e-4;
  for (const CellKind kind : {CellKind::AveragePooling, CellKind::LinearRecurrent,
                              CellKind::Gated, CellKind::LongShortTermMemory}) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      hebr::Rng rng(seed);
      auto p = hebr::make_cell(kind, 3, 4);
      randomize(p, rng);
      const MatSeq xs = random_seq(rng, 6, 2, 3);
      const MatSeq weights = random_seq(rng, 6, 2, 4);

      hebr::CellCache cache;
      hebr::cell_forward(p, xs, cache);
      auto grads = hebr::make_cell(kind, 3, 4);
      const MatSeq dx = hebr::cell_backward(p, cache, weights, grads);

      auto check_block = [&](Mat& param, const Mat& grad) {
        for (Eigen::Index i = 0; i < param.size(); ++i) {
          const double saved = param.data()[i];
          param.data()[i] = saved + kStep;
          const double up = weighted_sum(hebr::cell_forward(p, xs), weights);
          param.data()[i] = saved - kStep;
          const double down = weighted_sum(hebr::cell_forward(p, xs), weights);
          param.data()[i] = saved;
          const double fd = (up - down) / (2 * kStep);
          const double an = grad.data()[i];
          worst = std::max(worst,
                           std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-7}));
        }
      };
      check_block(p.Wx, grads.Wx);
      if (p.Wh.size() > 0) check_block(p.Wh, grads.Wh);
      if (p.b.size() > 0) {
        Mat bm = p.b, gm = grads.b;
        for (Eigen::Index i = 0; i < bm.size(); ++i) {
          const double saved = p.b(i);
          p.b(i) = saved + kStep;
          const double up = weighted_sum(hebr::cell_forward(p, xs), weights);
          p.b(i) = saved - kStep;
          const double down = weighted_sum(hebr::cell_forward(p, xs), weights);
          p.b(i) = saved;
          const double fd = (up - down) / (2 * kStep);
          worst = std::max(worst, std::abs(grads.b(i) - fd) /
                                      std::max({std::abs(grads.b(i)), std::abs(fd), 1e-7}));
        }
      }

      // input gradients too
      MatSeq xs_mut = xs;
      for (std::size_t t = 0; t < xs_mut.size(); ++t) {
        for (Eigen::Index i = 0; i < xs_mut[t].size(); ++i) {
          const double saved = xs_mut[t].data()[i];
          xs_mut[t].data()[i] = saved + kStep;
          const double up = weighted_sum(hebr::cell_forward(p, xs_mut), weights);
          xs_mut[t].data()[i] = saved - kStep;
          const double down = weighted_sum(hebr::cell_forward(p, xs_mut), weights);
          xs_mut[t].data()[i] = saved;
          const double fd = (up - down) / (2 * kStep);
          const double an = dx[t].data()[i];
          worst = std::max(worst,
                           std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-7}));
        }
      }
    }
    INFO("cell kind ", hebr::cell_kind_name(kind), " worst rel err ", worst);
    CHECK(worst < kTol);
  }
}

TEST_CASE("deterministic forward") {
  hebr::Rng rng(9);
  auto p = hebr::make_cell(CellKind::Gated, 2, 3);
  randomize(p, rng);
  const MatSeq xs = random_seq(rng, 5, 3, 2);
  const MatSeq a = hebr::cell_forward(p, xs);
  const MatSeq b = hebr::cell_forward(p, xs);
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK((a[t] - b[t]).cwiseAbs().maxCoeff() == 0.0);
  }
}
