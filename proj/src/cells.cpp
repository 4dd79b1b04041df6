#include "hebr/cells.hpp"

#include "hebr/errors.hpp"

namespace hebr {

namespace {

inline Mat sigmoid(const Mat& x) { return ((-x.array()).exp() + 1.0).inverse().matrix(); }

void check_input(const CellParams& p, const Mat& x_t, const CellState& s) {
  if (x_t.cols() != p.input_dim) {
    throw shape_error("cell_step: input has " + std::to_string(x_t.cols()) +
                      " columns, cell expects " + std::to_string(p.input_dim));
  }
  if (x_t.rows() != s.h.rows()) throw shape_error("cell_step: batch size changed mid-sequence");
}

}  // namespace

const char* cell_kind_name(CellKind k) {
  switch (k) {
    case CellKind::AveragePooling: return "average_pooling";
    case CellKind::LinearRecurrent: return "linear_recurrent";
    case CellKind::Gated: return "gated";
    case CellKind::LongShortTermMemory: return "lstm";
  }
  return "?";
}

CellKind cell_kind_from_name(const std::string& name) {
  if (name == "average_pooling") return CellKind::AveragePooling;
  if (name == "linear_recurrent") return CellKind::LinearRecurrent;
  if (name == "gated") return CellKind::Gated;
  if (name == "lstm") return CellKind::LongShortTermMemory;
  throw config_error("unknown cell kind '" + name + "'");
}

int cell_gate_rows(CellKind k) {
  switch (k) {
    case CellKind::AveragePooling:
    case CellKind::LinearRecurrent: return 1;
    case CellKind::Gated: return 3;
    case CellKind::LongShortTermMemory: return 4;
  }
  return 1;
}

CellParams make_cell(CellKind kind, int input_dim, int hidden_dim) {
  if (input_dim < 1 || hidden_dim < 1) throw shape_error("cell dims must be positive");
  CellParams p;
  p.kind = kind;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const int rows = cell_gate_rows(kind) * hidden_dim;
  p.Wx = Mat::Zero(rows, input_dim);
  if (kind != CellKind::AveragePooling) {
    p.Wh = Mat::Zero(rows, hidden_dim);
    p.b = Vec::Zero(rows);
  }
  return p;
}

CellState make_state(const CellParams& p, int batch) {
  CellState s;
  s.h = Mat::Zero(batch, p.hidden_dim);
  if (p.kind == CellKind::LongShortTermMemory || p.kind == CellKind::AveragePooling) {
    s.aux = Mat::Zero(batch, p.hidden_dim);
  }
  s.t = 0;
  return s;
}

namespace {

// reused across steps to keep per-step allocations off the hot path
struct StepScratch {
  Mat pre;
};

// One step for a block of rows. When `cache` is given, records what the
// backward pass needs at position t.
void step(const CellParams& p, const Mat& x_t, CellState& s, CellCache* cache,
          StepScratch& scratch) {
  const int m = p.hidden_dim;
  Mat& pre = scratch.pre;
  switch (p.kind) {
    case CellKind::AveragePooling: {
      s.aux.noalias() += x_t * p.Wx.transpose();
      s.h = s.aux / static_cast<double>(s.t + 1);
      break;
    }
    case CellKind::LinearRecurrent: {
      pre.noalias() = x_t * p.Wx.transpose();
      pre.noalias() += s.h * p.Wh.transpose();
      pre.rowwise() += p.b.transpose();
      s.h = pre.array().tanh().matrix();
      break;
    }
    case CellKind::Gated: {
      pre.noalias() = x_t * p.Wx.transpose();
      pre.rowwise() += p.b.transpose();
      pre.leftCols(2 * m).noalias() += s.h * p.Wh.topRows(2 * m).transpose();
      Mat acts(x_t.rows(), 3 * m);
      acts.leftCols(2 * m) = sigmoid(pre.leftCols(2 * m));  // update, reset
      const Mat rh = acts.middleCols(m, m).array() * s.h.array();
      pre.rightCols(m).noalias() += rh * p.Wh.bottomRows(m).transpose();
      acts.rightCols(m) = pre.rightCols(m).array().tanh().matrix();  // candidate
      const auto z = acts.leftCols(m).array();
      const auto g = acts.rightCols(m).array();
      s.h = ((1.0 - z) * s.h.array() + z * g).matrix();
      if (cache) {
        cache->acts.push_back(std::move(acts));
        cache->aux.push_back(rh);
      }
      break;
    }
    case CellKind::LongShortTermMemory: {
      pre.noalias() = x_t * p.Wx.transpose();
      pre.noalias() += s.h * p.Wh.transpose();
      pre.rowwise() += p.b.transpose();
      Mat acts(x_t.rows(), 4 * m);
      acts.leftCols(2 * m) = sigmoid(pre.leftCols(2 * m));                   // input, forget
      acts.middleCols(2 * m, m) = pre.middleCols(2 * m, m).array().tanh();   // candidate
      acts.rightCols(m) = sigmoid(pre.rightCols(m));                         // output
      const auto i = acts.leftCols(m).array();
      const auto f = acts.middleCols(m, m).array();
      const auto g = acts.middleCols(2 * m, m).array();
      const auto o = acts.rightCols(m).array();
      s.aux = (f * s.aux.array() + i * g).matrix();
      Mat tanh_c = s.aux.array().tanh().matrix();
      s.h = (o * tanh_c.array()).matrix();
      if (cache) {
        cache->acts.push_back(std::move(acts));
        cache->aux.push_back(s.aux);
        cache->aux2.push_back(std::move(tanh_c));
      }
      break;
    }
  }
  ++s.t;
  if (cache) cache->h.push_back(s.h);
}

}  // namespace

void cell_step(const CellParams& p, const Mat& x_t, CellState& state) {
  check_input(p, x_t, state);
  StepScratch scratch;
  step(p, x_t, state, nullptr, scratch);
}

MatSeq cell_forward(const CellParams& p, const MatSeq& xs) {
  if (xs.empty()) throw shape_error("cell_forward: empty sequence");
  CellState s = make_state(p, static_cast<int>(xs.front().rows()));
  MatSeq hs;
  hs.reserve(xs.size());
  StepScratch scratch;
  for (const auto& x_t : xs) {
    check_input(p, x_t, s);
    step(p, x_t, s, nullptr, scratch);
    hs.push_back(s.h);
  }
  return hs;
}

const MatSeq& cell_forward(const CellParams& p, const MatSeq& xs, CellCache& cache) {
  if (xs.empty()) throw shape_error("cell_forward: empty sequence");
  cache = CellCache{};
  cache.x = &xs;
  cache.h.reserve(xs.size());
  CellState s = make_state(p, static_cast<int>(xs.front().rows()));
  StepScratch scratch;
  for (const auto& x_t : xs) {
    check_input(p, x_t, s);
    step(p, x_t, s, &cache, scratch);
  }
  return cache.h;
}

MatSeq cell_backward(const CellParams& p, const CellCache& cache, const MatSeq& upstream,
                     CellParams& grads) {
  const auto T = static_cast<int>(cache.h.size());
  if (static_cast<int>(upstream.size()) != T) {
    throw shape_error("cell_backward: upstream length mismatch");
  }
  const auto& xs = *cache.x;
  const int B = static_cast<int>(cache.h.front().rows());
  const int m = p.hidden_dim;
  MatSeq dx(static_cast<std::size_t>(T));

  switch (p.kind) {
    case CellKind::AveragePooling: {
      // h_t = (1/t) sum_{tau<=t} x_tau Wx^T; suffix-accumulate the upstream.
      Mat acc = Mat::Zero(B, m);
      for (int t = T - 1; t >= 0; --t) {
        acc += upstream[static_cast<std::size_t>(t)] / static_cast<double>(t + 1);
        grads.Wx.noalias() += acc.transpose() * xs[static_cast<std::size_t>(t)];
        dx[static_cast<std::size_t>(t)].noalias() = acc * p.Wx;
      }
      break;
    }
    case CellKind::LinearRecurrent: {
      Mat dh_carry = Mat::Zero(B, m);
      for (int t = T - 1; t >= 0; --t) {
        const auto tt = static_cast<std::size_t>(t);
        const Mat& h = cache.h[tt];
        const Mat dh = upstream[tt] + dh_carry;
        const Mat dpre = (dh.array() * (1.0 - h.array().square())).matrix();
        grads.Wx.noalias() += dpre.transpose() * xs[tt];
        if (t > 0) grads.Wh.noalias() += dpre.transpose() * cache.h[tt - 1];
        grads.b += dpre.colwise().sum().transpose();
        dx[tt].noalias() = dpre * p.Wx;
        dh_carry.noalias() = dpre * p.Wh;
      }
      break;
    }
    case CellKind::Gated: {
      Mat dh_carry = Mat::Zero(B, m);
      for (int t = T - 1; t >= 0; --t) {
        const auto tt = static_cast<std::size_t>(t);
        const Mat& acts = cache.acts[tt];
        const auto z = acts.leftCols(m).array();
        const auto r = acts.middleCols(m, m).array();
        const auto g = acts.rightCols(m).array();
        const Mat h_prev = t > 0 ? cache.h[tt - 1] : Mat::Zero(B, m);
        const Mat dh = upstream[tt] + dh_carry;

        const Mat dz = (dh.array() * (g - h_prev.array())).matrix();
        const Mat dg = (dh.array() * z).matrix();
        Mat dh_prev = (dh.array() * (1.0 - z)).matrix();

        Mat dpre(B, 3 * m);
        dpre.rightCols(m) = (dg.array() * (1.0 - g.square())).matrix();
        const Mat drh = dpre.rightCols(m) * p.Wh.bottomRows(m);
        const Mat dr = (drh.array() * h_prev.array()).matrix();
        dh_prev.array() += drh.array() * r;
        dpre.leftCols(m) = (dz.array() * z * (1.0 - z)).matrix();
        dpre.middleCols(m, m) = (dr.array() * r * (1.0 - r)).matrix();

        grads.Wx.noalias() += dpre.transpose() * xs[tt];
        grads.Wh.topRows(2 * m).noalias() += dpre.leftCols(2 * m).transpose() * h_prev;
        grads.Wh.bottomRows(m).noalias() += dpre.rightCols(m).transpose() * cache.aux[tt];
        grads.b += dpre.colwise().sum().transpose();
        dx[tt].noalias() = dpre * p.Wx;
        dh_prev.noalias() += dpre.leftCols(2 * m) * p.Wh.topRows(2 * m);
        dh_carry = std::move(dh_prev);
      }
      break;
    }
    case CellKind::LongShortTermMemory: {
      Mat dh_carry = Mat::Zero(B, m);
      Mat dc_carry = Mat::Zero(B, m);
      for (int t = T - 1; t >= 0; --t) {
        const auto tt = static_cast<std::size_t>(t);
        const Mat& acts = cache.acts[tt];
        const auto i = acts.leftCols(m).array();
        const auto f = acts.middleCols(m, m).array();
        const auto g = acts.middleCols(2 * m, m).array();
        const auto o = acts.rightCols(m).array();
        const auto tanh_c = cache.aux2[tt].array();
        const Mat c_prev = t > 0 ? cache.aux[tt - 1] : Mat::Zero(B, m);
        const Mat dh = upstream[tt] + dh_carry;

        const Mat do_ = (dh.array() * tanh_c).matrix();
        Mat dc = (dh.array() * o * (1.0 - tanh_c.square())).matrix() + dc_carry;

        Mat dpre(B, 4 * m);
        dpre.leftCols(m) = (dc.array() * g * i * (1.0 - i)).matrix();
        dpre.middleCols(m, m) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
        dpre.middleCols(2 * m, m) = (dc.array() * i * (1.0 - g.square())).matrix();
        dpre.rightCols(m) = (do_.array() * o * (1.0 - o)).matrix();

        grads.Wx.noalias() += dpre.transpose() * xs[tt];
        if (t > 0) grads.Wh.noalias() += dpre.transpose() * cache.h[tt - 1];
        grads.b += dpre.colwise().sum().transpose();
        dx[tt].noalias() = dpre * p.Wx;
        dh_carry.noalias() = dpre * p.Wh;
        dc_carry = (dc.array() * f).matrix();
      }
      break;
    }
  }
  return dx;
}

}  // namespace hebr
