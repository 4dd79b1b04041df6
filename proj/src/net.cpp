#include "hebr/net.hpp"

#include <cmath>

#include "hebr/errors.hpp"
#include "hebr/threading.hpp"

namespace hebr {

HebrConfig HebrConfig::variant(const std::string& name, HebrConfig base) {
  base.use_temperature = true;
  base.use_ntl = true;
  base.use_multistep_fusion = true;
  base.use_attention = true;
  base.flat_concat = false;
  if (name == "full") {
  } else if (name == "no_temperature") {
    base.use_temperature = false;
  } else if (name == "no_ntl") {
    base.use_ntl = false;
  } else if (name == "usage_only") {
    base.use_temperature = base.use_ntl = false;
  } else if (name == "no_fusion") {
    base.use_multistep_fusion = false;
  } else if (name == "no_attention") {
    base.use_attention = false;
  } else if (name == "no_fusion_no_attention") {
    base.use_multistep_fusion = base.use_attention = false;
  } else if (name == "mrnn_flat") {
    base.flat_concat = true;
  } else {
    throw config_error("unknown model variant '" + name + "'");
  }
  return base;
}

std::string HebrConfig::variant_name() const {
  if (flat_concat) return "mrnn_flat";
  if (!use_ntl && !use_temperature) return "usage_only";
  std::string name;
  auto add = [&name](const char* part) {
    if (!name.empty()) name += '+';
    name += part;
  };
  if (!use_temperature) add("no_temperature");
  if (!use_ntl) add("no_ntl");
  if (!use_multistep_fusion && !use_attention) {
    add("no_fusion_no_attention");
  } else if (!use_multistep_fusion) {
    add("no_fusion");
  } else if (!use_attention) {
    add("no_attention");
  }
  return name.empty() ? "full" : name;
}

int HebrConfig::final_dim() const {
  if (flat_concat) return d_e;
  if (!use_ntl && !use_temperature) return d_e;
  if (use_ntl && use_temperature) return d_elc;
  return use_ntl ? d_el : d_ec;
}

void HebrConfig::validate() const {
  if (window_days < 1) throw config_error("window_days must be >= 1");
  for (int d : {d_e, d_l, d_c, d_ec, d_el, d_elc}) {
    if (d < 1) throw config_error("all hidden dims must be >= 1");
  }
}

HebrParams make_params(const HebrConfig& cfg) {
  cfg.validate();
  HebrParams p;
  p.cfg = cfg;
  if (cfg.flat_concat) {
    p.enc_e = make_cell(cfg.cell_kind, HebrConfig::kFlatDim, cfg.d_e);
  } else {
    p.enc_e = make_cell(cfg.cell_kind, HebrConfig::kUsageDim, cfg.d_e);
    if (cfg.use_ntl) {
      p.enc_l = make_cell(cfg.cell_kind, HebrConfig::kNtlDim, cfg.d_l);
      p.fuse_l_to_e = Mat::Zero(cfg.d_e, cfg.d_l);
      if (cfg.use_attention) p.attn_el = Vec::Zero(2 * cfg.d_e);
      p.enc_el = make_cell(cfg.cell_kind, 2 * cfg.d_e, cfg.d_el);
    }
    if (cfg.use_temperature) {
      p.enc_c = make_cell(cfg.cell_kind, HebrConfig::kTempDim, cfg.d_c);
      p.fuse_c_to_e = Mat::Zero(cfg.d_e, cfg.d_c);
      if (cfg.use_attention) p.attn_ec = Vec::Zero(2 * cfg.d_e);
      p.enc_ec = make_cell(cfg.cell_kind, 2 * cfg.d_e, cfg.d_ec);
    }
    if (cfg.use_ntl && cfg.use_temperature) {
      p.fuse_el_to_ec = Mat::Zero(cfg.d_ec, cfg.d_el);
      if (cfg.use_attention) p.attn_elc = Vec::Zero(2 * cfg.d_ec);
      p.enc_elc = make_cell(cfg.cell_kind, 2 * cfg.d_ec, cfg.d_elc);
    }
  }
  p.out_W = Mat::Zero(2, cfg.final_dim());
  p.out_b = Vec::Zero(2);
  return p;
}

namespace {

void add_cell_refs(std::vector<TensorRef>& refs, const std::string& prefix, CellParams& c) {
  if (c.Wx.size() == 0) return;
  refs.push_back({prefix + ".Wx", c.Wx.data(), c.Wx.rows(), c.Wx.cols()});
  if (c.Wh.size() > 0) refs.push_back({prefix + ".Wh", c.Wh.data(), c.Wh.rows(), c.Wh.cols()});
  if (c.b.size() > 0) refs.push_back({prefix + ".b", c.b.data(), c.b.size(), 1});
}

void add_mat_ref(std::vector<TensorRef>& refs, const std::string& name, Mat& m) {
  if (m.size() > 0) refs.push_back({name, m.data(), m.rows(), m.cols()});
}

void add_vec_ref(std::vector<TensorRef>& refs, const std::string& name, Vec& v) {
  if (v.size() > 0) refs.push_back({name, v.data(), v.size(), 1});
}

}  // namespace

std::vector<TensorRef> tensor_refs(HebrParams& p) {
  std::vector<TensorRef> refs;
  add_cell_refs(refs, "enc_e", p.enc_e);
  add_cell_refs(refs, "enc_l", p.enc_l);
  add_cell_refs(refs, "enc_c", p.enc_c);
  add_mat_ref(refs, "fuse_l_to_e", p.fuse_l_to_e);
  add_mat_ref(refs, "fuse_c_to_e", p.fuse_c_to_e);
  add_vec_ref(refs, "attn_el", p.attn_el);
  add_vec_ref(refs, "attn_ec", p.attn_ec);
  add_cell_refs(refs, "enc_ec", p.enc_ec);
  add_cell_refs(refs, "enc_el", p.enc_el);
  add_mat_ref(refs, "fuse_el_to_ec", p.fuse_el_to_ec);
  add_vec_ref(refs, "attn_elc", p.attn_elc);
  add_cell_refs(refs, "enc_elc", p.enc_elc);
  add_mat_ref(refs, "out.W", p.out_W);
  add_vec_ref(refs, "out.b", p.out_b);
  return refs;
}

void init_params(HebrParams& p, Rng& rng) {
  // fan_in is the column count for matrices; biases and attention vectors use
  // the hidden size they feed.
  auto fill = [&rng](double* data, Eigen::Index n, double fan_in) {
    const double bound = 1.0 / std::sqrt(std::max(1.0, fan_in));
    for (Eigen::Index i = 0; i < n; ++i) data[i] = rng.uniform(-bound, bound);
  };
  for (auto& ref : tensor_refs(p)) {
    double fan = static_cast<double>(ref.cols);
    if (ref.cols == 1) fan = static_cast<double>(ref.rows);  // vectors
    fill(ref.data, ref.size(), fan);
  }
}

NetInput build_input(const Dataset& d, const NormStats& norm, const HebrConfig& cfg,
                     std::span<const Sample> samples) {
  const int B = static_cast<int>(samples.size());
  if (B == 0) throw shape_error("build_input: empty sample block");
  const int T = samples.front().window_days;
  std::array<double, kNumChannels> mean{}, inv_sd{};
  for (int ch = 0; ch < kNumChannels; ++ch) {
    mean[static_cast<std::size_t>(ch)] = norm.channel[static_cast<std::size_t>(ch)].mean;
    const double sd = norm.channel[static_cast<std::size_t>(ch)].std;
    inv_sd[static_cast<std::size_t>(ch)] = sd > 0 ? 1.0 / sd : 1.0;
  }

  NetInput in;
  const bool want_l = cfg.flat_concat || cfg.use_ntl;
  const bool want_c = cfg.flat_concat || cfg.use_temperature;
  in.e.assign(static_cast<std::size_t>(T),
              Mat(B, cfg.flat_concat ? HebrConfig::kFlatDim : HebrConfig::kUsageDim));
  if (!cfg.flat_concat && want_l) in.l.assign(static_cast<std::size_t>(T), Mat(B, 1));
  if (!cfg.flat_concat && want_c) in.c.assign(static_cast<std::size_t>(T), Mat(B, 2));

  for (int b = 0; b < B; ++b) {
    const Sample& s = samples[static_cast<std::size_t>(b)];
    if (s.window_days != T) throw shape_error("build_input: mixed window lengths in one block");
    const auto& days = d.users[static_cast<std::size_t>(s.user_idx)].days;
    for (int t = 0; t < T; ++t) {
      const int row = s.start_day + t;
      auto normed = [&](int ch) {
        return (days(row, ch) - mean[static_cast<std::size_t>(ch)]) *
               inv_sd[static_cast<std::size_t>(ch)];
      };
      auto& et = in.e[static_cast<std::size_t>(t)];
      et(b, 0) = normed(kUsageTotal);
      et(b, 1) = normed(kUsageOnPeak);
      et(b, 2) = normed(kUsageOffPeak);
      if (cfg.flat_concat) {
        et(b, 3) = normed(kNtl);
        et(b, 4) = normed(kTempMax);
        et(b, 5) = normed(kTempMin);
      } else {
        if (want_l) in.l[static_cast<std::size_t>(t)](b, 0) = normed(kNtl);
        if (want_c) {
          in.c[static_cast<std::size_t>(t)](b, 0) = normed(kTempMax);
          in.c[static_cast<std::size_t>(t)](b, 1) = normed(kTempMin);
        }
      }
    }
  }
  return in;
}

namespace {

/// Multi-step fusion of a primary hidden sequence with a secondary one,
/// followed by attention over time. The fused row at step t pairs the primary
/// state with the mapped secondary state at both t and t-1 (zero at the
/// start), so a one-step lag in cross-source influence stays visible. With
/// `multistep` off the two parts are plain concatenation instead of products.
void fuse_attn_forward(bool multistep, bool attention, const MatSeq& h, const MatSeq& hp,
                       const Mat& W, const Vec& w_attn, FuseAttnCache& cache) {
  const auto T = static_cast<int>(h.size());
  const int B = static_cast<int>(h.front().rows());
  const auto d = h.front().cols();
  cache.h = &h;
  cache.hp = &hp;
  cache.u.resize(static_cast<std::size_t>(T));
  cache.fused.resize(static_cast<std::size_t>(T));
  cache.tanh_fused.resize(static_cast<std::size_t>(T));
  cache.out.resize(static_cast<std::size_t>(T));

  for (int t = 0; t < T; ++t) {
    const auto tt = static_cast<std::size_t>(t);
    cache.u[tt].noalias() = hp[tt] * W.transpose();
    Mat& fused = cache.fused[tt];
    fused.resize(B, 2 * d);
    if (multistep) {
      if (t == 0) {
        fused.leftCols(d).setZero();  // no previous secondary state yet
      } else {
        fused.leftCols(d) = h[tt].array() * cache.u[tt - 1].array();
      }
      fused.rightCols(d) = h[tt].array() * cache.u[tt].array();
    } else {
      fused.leftCols(d) = h[tt];
      fused.rightCols(d) = cache.u[tt];
    }
    cache.tanh_fused[tt] = fused.array().tanh().matrix();
  }

  cache.alpha.resize(B, T);
  if (attention) {
    Mat scores(B, T);
    for (int t = 0; t < T; ++t) {
      scores.col(t).noalias() = cache.fused[static_cast<std::size_t>(t)] * w_attn;
    }
    const Vec rowmax = scores.rowwise().maxCoeff();
    cache.alpha = (scores.colwise() - rowmax).array().exp().matrix();
    const Vec rowsum = cache.alpha.rowwise().sum();
    cache.alpha.array().colwise() /= rowsum.array();
  } else {
    cache.alpha.setConstant(1.0 / static_cast<double>(T));
  }

  for (int t = 0; t < T; ++t) {
    const auto tt = static_cast<std::size_t>(t);
    cache.out[tt] =
        (cache.tanh_fused[tt].array().colwise() * cache.alpha.col(t).array()).matrix();
  }
}

void fuse_attn_backward(bool multistep, bool attention, const FuseAttnCache& cache,
                        const Mat& W, const Vec& w_attn, const MatSeq& d_out, Mat& dW,
                        Vec* dw_attn, MatSeq& dh, MatSeq& dhp) {
  const auto T = static_cast<int>(cache.out.size());
  const int B = static_cast<int>(cache.out.front().rows());
  const auto d = cache.h->front().cols();
  const MatSeq& h = *cache.h;
  const MatSeq& hp = *cache.hp;

  MatSeq dfused(static_cast<std::size_t>(T));
  Mat dalpha;
  if (attention) dalpha.resize(B, T);
  for (int t = 0; t < T; ++t) {
    const auto tt = static_cast<std::size_t>(t);
    const auto& th = cache.tanh_fused[tt].array();
    dfused[tt] = ((d_out[tt].array().colwise() * cache.alpha.col(t).array()) *
                  (1.0 - th.square()))
                     .matrix();
    if (attention) dalpha.col(t) = (d_out[tt].array() * th).rowwise().sum().matrix();
  }

  if (attention) {
    // softmax backward per row, then through score_t = <w, fused_t>
    const Vec inner = (cache.alpha.array() * dalpha.array()).rowwise().sum().matrix();
    const Mat dscore =
        (cache.alpha.array() * (dalpha.colwise() - inner).array()).matrix();
    for (int t = 0; t < T; ++t) {
      const auto tt = static_cast<std::size_t>(t);
      dfused[tt].noalias() += dscore.col(t) * w_attn.transpose();
      dw_attn->noalias() += cache.fused[tt].transpose() * dscore.col(t);
    }
  }

  dh.assign(static_cast<std::size_t>(T), Mat::Zero(B, d));
  dhp.assign(static_cast<std::size_t>(T), Mat::Zero(B, static_cast<int>(hp.front().cols())));
  MatSeq du(static_cast<std::size_t>(T), Mat::Zero(B, d));
  for (int t = 0; t < T; ++t) {
    const auto tt = static_cast<std::size_t>(t);
    const auto left = dfused[tt].leftCols(d);
    const auto right = dfused[tt].rightCols(d);
    if (multistep) {
      if (t > 0) {
        dh[tt] = (left.array() * cache.u[tt - 1].array()).matrix();
        du[tt - 1].array() += left.array() * h[tt].array();
      }
      dh[tt].array() += right.array() * cache.u[tt].array();
      du[tt].array() += right.array() * h[tt].array();
    } else {
      dh[tt] = left;
      du[tt] += right;
    }
  }
  for (int t = 0; t < T; ++t) {
    const auto tt = static_cast<std::size_t>(t);
    dW.noalias() += du[tt].transpose() * hp[tt];
    dhp[tt].noalias() = du[tt] * W;
  }
}

Mat mean_pool(const MatSeq& hs) {
  Mat pooled = hs.front();
  for (std::size_t t = 1; t < hs.size(); ++t) pooled += hs[t];
  return pooled / static_cast<double>(hs.size());
}

[[noreturn]] void throw_non_finite(const NetCache& cache) {
  auto bad = [](const MatSeq& seq) {
    for (const auto& m : seq) {
      if (!m.allFinite()) return true;
    }
    return false;
  };
  const char* level = "output";
  if (bad(cache.enc_e.h) || bad(cache.enc_l.h) || bad(cache.enc_c.h)) {
    level = "level-1 encoders";
  } else if (bad(cache.fuse_el.out) || bad(cache.fuse_ec.out)) {
    level = "level-1 fusion";
  } else if (bad(cache.enc_ec.h) || bad(cache.enc_el.h)) {
    level = "level-2 encoders";
  } else if (bad(cache.fuse_elc.out)) {
    level = "level-2 fusion";
  } else if (bad(cache.enc_elc.h)) {
    level = "level-3 encoder";
  }
  throw numeric_error(std::string("non-finite value produced at ") + level);
}

}  // namespace

Vec net_forward(const HebrParams& p, const NetInput& in, NetCache& cache,
                AttentionTraceBlock* traces) {
  const HebrConfig& cfg = p.cfg;
  if (in.e.empty()) throw shape_error("net_forward: empty input");
  cache = NetCache{};
  cache.in = &in;

  const MatSeq* final_seq = nullptr;
  if (cfg.flat_concat || (!cfg.use_ntl && !cfg.use_temperature)) {
    final_seq = &cell_forward(p.enc_e, in.e, cache.enc_e);
  } else {
    const MatSeq& he = cell_forward(p.enc_e, in.e, cache.enc_e);
    const MatSeq* hl = cfg.use_ntl ? &cell_forward(p.enc_l, in.l, cache.enc_l) : nullptr;
    const MatSeq* hc =
        cfg.use_temperature ? &cell_forward(p.enc_c, in.c, cache.enc_c) : nullptr;
    if (cfg.use_ntl) {
      fuse_attn_forward(cfg.use_multistep_fusion, cfg.use_attention, he, *hl, p.fuse_l_to_e,
                        p.attn_el, cache.fuse_el);
    }
    if (cfg.use_temperature) {
      fuse_attn_forward(cfg.use_multistep_fusion, cfg.use_attention, he, *hc, p.fuse_c_to_e,
                        p.attn_ec, cache.fuse_ec);
    }
    if (cfg.use_ntl && cfg.use_temperature) {
      const MatSeq& hec = cell_forward(p.enc_ec, cache.fuse_ec.out, cache.enc_ec);
      const MatSeq& hel = cell_forward(p.enc_el, cache.fuse_el.out, cache.enc_el);
      fuse_attn_forward(cfg.use_multistep_fusion, cfg.use_attention, hec, hel, p.fuse_el_to_ec,
                        p.attn_elc, cache.fuse_elc);
      final_seq = &cell_forward(p.enc_elc, cache.fuse_elc.out, cache.enc_elc);
    } else if (cfg.use_ntl) {
      final_seq = &cell_forward(p.enc_el, cache.fuse_el.out, cache.enc_el);
    } else {
      final_seq = &cell_forward(p.enc_ec, cache.fuse_ec.out, cache.enc_ec);
    }
  }

  cache.pooled = mean_pool(*final_seq);
  cache.logits = cache.pooled * p.out_W.transpose();
  cache.logits.rowwise() += p.out_b.transpose();

  const int B = static_cast<int>(cache.logits.rows());
  cache.prob.resize(B);
  for (int b = 0; b < B; ++b) {
    // two-class softmax, theft class is index 1
    cache.prob(b) = 1.0 / (1.0 + std::exp(cache.logits(b, 0) - cache.logits(b, 1)));
  }
  if (!cache.prob.allFinite()) throw_non_finite(cache);

  if (traces) {
    *traces = AttentionTraceBlock{};
    if (cache.fuse_ec.alpha.size() > 0) traces->alpha_ec = cache.fuse_ec.alpha;
    if (cache.fuse_el.alpha.size() > 0) traces->alpha_el = cache.fuse_el.alpha;
    if (cache.fuse_elc.alpha.size() > 0) traces->alpha_elc = cache.fuse_elc.alpha;
  }
  return cache.prob;
}

void net_backward(const HebrParams& p, const NetCache& cache, const Vec& dprob,
                  HebrParams& grads) {
  const HebrConfig& cfg = p.cfg;
  const int B = static_cast<int>(cache.prob.size());
  if (dprob.size() != B) throw shape_error("net_backward: dprob size mismatch");

  Mat dlogits(B, 2);
  for (int b = 0; b < B; ++b) {
    const double g = dprob(b) * cache.prob(b) * (1.0 - cache.prob(b));
    dlogits(b, 0) = -g;
    dlogits(b, 1) = g;
  }

  grads.out_W.noalias() += dlogits.transpose() * cache.pooled;
  grads.out_b += dlogits.colwise().sum().transpose();
  const Mat dpooled = dlogits * p.out_W;

  const auto T = static_cast<int>(cache.in->e.size());
  const double inv_t = 1.0 / static_cast<double>(T);

  auto pooled_upstream = [&](Eigen::Index dim) {
    return MatSeq(static_cast<std::size_t>(T), dpooled * inv_t);
    (void)dim;
  };

  if (cfg.flat_concat || (!cfg.use_ntl && !cfg.use_temperature)) {
    MatSeq up = pooled_upstream(cfg.d_e);
    cell_backward(p.enc_e, cache.enc_e, up, grads.enc_e);
    return;
  }

  MatSeq dhe;  // gradient into the usage hidden sequence, accumulated
  if (cfg.use_ntl && cfg.use_temperature) {
    MatSeq up = pooled_upstream(cfg.d_elc);
    MatSeq d_ielc = cell_backward(p.enc_elc, cache.enc_elc, up, grads.enc_elc);
    MatSeq dhec, dhel;
    fuse_attn_backward(cfg.use_multistep_fusion, cfg.use_attention, cache.fuse_elc,
                       p.fuse_el_to_ec, p.attn_elc, d_ielc, grads.fuse_el_to_ec,
                       cfg.use_attention ? &grads.attn_elc : nullptr, dhec, dhel);
    MatSeq d_iec = cell_backward(p.enc_ec, cache.enc_ec, dhec, grads.enc_ec);
    MatSeq d_iel = cell_backward(p.enc_el, cache.enc_el, dhel, grads.enc_el);
    MatSeq dhe_from_ec, dhc;
    fuse_attn_backward(cfg.use_multistep_fusion, cfg.use_attention, cache.fuse_ec,
                       p.fuse_c_to_e, p.attn_ec, d_iec, grads.fuse_c_to_e,
                       cfg.use_attention ? &grads.attn_ec : nullptr, dhe_from_ec, dhc);
    MatSeq dhl;
    fuse_attn_backward(cfg.use_multistep_fusion, cfg.use_attention, cache.fuse_el,
                       p.fuse_l_to_e, p.attn_el, d_iel, grads.fuse_l_to_e,
                       cfg.use_attention ? &grads.attn_el : nullptr, dhe, dhl);
    for (std::size_t t = 0; t < dhe.size(); ++t) dhe[t] += dhe_from_ec[t];
    cell_backward(p.enc_l, cache.enc_l, dhl, grads.enc_l);
    cell_backward(p.enc_c, cache.enc_c, dhc, grads.enc_c);
  } else if (cfg.use_ntl) {
    MatSeq up = pooled_upstream(cfg.d_el);
    MatSeq d_iel = cell_backward(p.enc_el, cache.enc_el, up, grads.enc_el);
    MatSeq dhl;
    fuse_attn_backward(cfg.use_multistep_fusion, cfg.use_attention, cache.fuse_el,
                       p.fuse_l_to_e, p.attn_el, d_iel, grads.fuse_l_to_e,
                       cfg.use_attention ? &grads.attn_el : nullptr, dhe, dhl);
    cell_backward(p.enc_l, cache.enc_l, dhl, grads.enc_l);
  } else {
    MatSeq up = pooled_upstream(cfg.d_ec);
    MatSeq d_iec = cell_backward(p.enc_ec, cache.enc_ec, up, grads.enc_ec);
    MatSeq dhc;
    fuse_attn_backward(cfg.use_multistep_fusion, cfg.use_attention, cache.fuse_ec,
                       p.fuse_c_to_e, p.attn_ec, d_iec, grads.fuse_c_to_e,
                       cfg.use_attention ? &grads.attn_ec : nullptr, dhe, dhc);
    cell_backward(p.enc_c, cache.enc_c, dhc, grads.enc_c);
  }
  cell_backward(p.enc_e, cache.enc_e, dhe, grads.enc_e);
}

ScoreResult score_samples(const HebrParams& p, const Dataset& d, const NormStats& norm,
                          const std::vector<Sample>& samples, int threads, bool want_traces) {
  constexpr int kBlock = 64;  // fixed so results are thread-count independent
  const int n = static_cast<int>(samples.size());
  ScoreResult result;
  result.prob = Vec::Zero(n);
  const bool has_elc = p.cfg.two_branches();
  const int T = n > 0 ? samples.front().window_days : 0;
  if (want_traces && has_elc) result.alpha_elc = Mat::Zero(n, T);

  const int n_blocks = (n + kBlock - 1) / kBlock;
  parallel_for(n_blocks, resolve_threads(threads), [&](int blk) {
    const int lo = blk * kBlock;
    const int hi = std::min(n, lo + kBlock);
    NetInput in = build_input(d, norm, p.cfg,
                              std::span<const Sample>(samples.data() + lo,
                                                      static_cast<std::size_t>(hi - lo)));
    NetCache cache;
    AttentionTraceBlock traces;
    const Vec prob =
        net_forward(p, in, cache, want_traces && has_elc ? &traces : nullptr);
    result.prob.segment(lo, hi - lo) = prob;
    if (want_traces && has_elc) {
      result.alpha_elc.middleRows(lo, hi - lo) = traces.alpha_elc;
    }
  });
  return result;
}

}  // namespace hebr
