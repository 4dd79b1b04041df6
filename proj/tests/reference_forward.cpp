#include "reference_forward.hpp"

#include <cmath>

namespace refnet {

namespace {

using Row = std::vector<double>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Gate row blocks in the stacked matrices: input, forget, candidate, output.
Rows lstm_encode(const hebr::CellParams& cell, const Rows& xs) {
  const int m = cell.hidden_dim;
  const int n = cell.input_dim;
  Row h(static_cast<std::size_t>(m), 0.0), c(static_cast<std::size_t>(m), 0.0);
  Rows out;
  for (const Row& x : xs) {
    Row i(m), f(m), g(m), o(m);
    for (int j = 0; j < m; ++j) {
      double pre_i = cell.b(0 * m + j);
      double pre_f = cell.b(1 * m + j);
      double pre_g = cell.b(2 * m + j);
      double pre_o = cell.b(3 * m + j);
      for (int k = 0; k < n; ++k) {
        pre_i += cell.Wx(0 * m + j, k) * x[static_cast<std::size_t>(k)];
        pre_f += cell.Wx(1 * m + j, k) * x[static_cast<std::size_t>(k)];
        pre_g += cell.Wx(2 * m + j, k) * x[static_cast<std::size_t>(k)];
        pre_o += cell.Wx(3 * m + j, k) * x[static_cast<std::size_t>(k)];
      }
      for (int k = 0; k < m; ++k) {
        pre_i += cell.Wh(0 * m + j, k) * h[static_cast<std::size_t>(k)];
        pre_f += cell.Wh(1 * m + j, k) * h[static_cast<std::size_t>(k)];
        pre_g += cell.Wh(2 * m + j, k) * h[static_cast<std::size_t>(k)];
        pre_o += cell.Wh(3 * m + j, k) * h[static_cast<std::size_t>(k)];
      }
      i[static_cast<std::size_t>(j)] = sigmoid(pre_i);
      f[static_cast<std::size_t>(j)] = sigmoid(pre_f);
      g[static_cast<std::size_t>(j)] = std::tanh(pre_g);
      o[static_cast<std::size_t>(j)] = sigmoid(pre_o);
    }
    for (int j = 0; j < m; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      c[jj] = f[jj] * c[jj] + i[jj] * g[jj];
      h[jj] = o[jj] * std::tanh(c[jj]);
    }
    out.push_back(h);
  }
  return out;
}

Row matvec(const hebr::Mat& w, const Row& v) {
  Row out(static_cast<std::size_t>(w.rows()), 0.0);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * v[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = acc;
  }
  return out;
}

// fused_t = (h_t . W hp_{t-1}) ++ (h_t . W hp_t), then attention over time:
// alpha = softmax_t <w, fused_t>, out_t = alpha_t * tanh(fused_t)
Rows fuse_with_attention(const Rows& h, const Rows& hp, const hebr::Mat& W,
                         const hebr::Vec& w_attn) {
  const std::size_t T = h.size();
  const std::size_t d = h[0].size();
  Rows fused(T, Row(2 * d, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    const Row u_now = matvec(W, hp[t]);
    Row u_prev(d, 0.0);
    if (t > 0) u_prev = matvec(W, hp[t - 1]);
    for (std::size_t j = 0; j < d; ++j) {
      fused[t][j] = h[t][j] * u_prev[j];
      fused[t][d + j] = h[t][j] * u_now[j];
    }
  }
  std::vector<double> score(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < 2 * d; ++j) {
      score[t] += w_attn(static_cast<Eigen::Index>(j)) * fused[t][j];
    }
  }
  double peak = score[0];
  for (double s : score) peak = std::max(peak, s);
  double z = 0.0;
  std::vector<double> alpha(T);
  for (std::size_t t = 0; t < T; ++t) {
    alpha[t] = std::exp(score[t] - peak);
    z += alpha[t];
  }
  Rows out(T, Row(2 * d, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    alpha[t] /= z;
    for (std::size_t j = 0; j < 2 * d; ++j) out[t][j] = alpha[t] * std::tanh(fused[t][j]);
  }
  return out;
}

}  // namespace

double forward_full_lstm(const hebr::HebrParams& p, const Rows& usage, const Rows& ntl,
                         const Rows& temperature) {
  const Rows he = lstm_encode(p.enc_e, usage);
  const Rows hl = lstm_encode(p.enc_l, ntl);
  const Rows hc = lstm_encode(p.enc_c, temperature);

  const Rows i_el = fuse_with_attention(he, hl, p.fuse_l_to_e, p.attn_el);
  const Rows i_ec = fuse_with_attention(he, hc, p.fuse_c_to_e, p.attn_ec);

  const Rows h_ec = lstm_encode(p.enc_ec, i_ec);
  const Rows h_el = lstm_encode(p.enc_el, i_el);

  const Rows i_elc = fuse_with_attention(h_ec, h_el, p.fuse_el_to_ec, p.attn_elc);
  const Rows h_elc = lstm_encode(p.enc_elc, i_elc);

  const std::size_t T = h_elc.size();
  const std::size_t d = h_elc[0].size();
  Row pooled(d, 0.0);
  for (const Row& h : h_elc) {
    for (std::size_t j = 0; j < d; ++j) pooled[j] += h[j];
  }
  for (std::size_t j = 0; j < d; ++j) pooled[j] /= static_cast<double>(T);

  double l0 = p.out_b(0), l1 = p.out_b(1);
  for (std::size_t j = 0; j < d; ++j) {
    l0 += p.out_W(0, static_cast<Eigen::Index>(j)) * pooled[j];
    l1 += p.out_W(1, static_cast<Eigen::Index>(j)) * pooled[j];
  }
  const double peak = std::max(l0, l1);
  const double e0 = std::exp(l0 - peak), e1 = std::exp(l1 - peak);
  return e1 / (e0 + e1);
}

}  // namespace refnet
