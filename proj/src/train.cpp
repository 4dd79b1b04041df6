#include "hebr/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "hebr/csv.hpp"
#include "hebr/errors.hpp"
#include "hebr/metrics.hpp"
#include "hebr/threading.hpp"

namespace hebr {

namespace {
constexpr double kProbClip = 1e-7;
constexpr int kGradBlock = 64;  // fixed reduction granularity, never thread-dependent
}  // namespace

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw config_error("learning_rate must be positive");
  if (batch_size < 1) throw config_error("batch_size must be >= 1");
  if (patience < 1) throw config_error("patience must be >= 1");
  if (max_epochs < 1) throw config_error("max_epochs must be >= 1");
  if (decay_every_epochs < 1) throw config_error("decay_every_epochs must be >= 1");
  if (!pos_weight_auto && pos_weight_fixed < 0) {
    throw config_error("pos_weight_fixed must be >= 0");
  }
}

double weighted_bce(double p, int y, double pos_weight) {
  const double q = std::clamp(p, kProbClip, 1.0 - kProbClip);
  return y ? pos_weight * -std::log(q) : -std::log(1.0 - q);
}

double weighted_bce_dp(double p, int y, double pos_weight) {
  if (p < kProbClip || p > 1.0 - kProbClip) return 0.0;  // clip region is flat
  return y ? -pos_weight / p : 1.0 / (1.0 - p);
}

double lr_at(int epoch, const TrainConfig& cfg) {
  const int steps = epoch / cfg.decay_every_epochs;
  return cfg.learning_rate / std::pow(cfg.decay_factor, steps);
}

AdamState make_adam_state(const HebrConfig& cfg) {
  AdamState s;
  s.m = make_params(cfg);
  s.v = make_params(cfg);
  s.t = 0;
  return s;
}

void adam_step(HebrParams& theta, HebrParams& grads, AdamState& state, double lr,
               const TrainConfig& cfg) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  auto th = tensor_refs(theta);
  auto gr = tensor_refs(grads);
  auto ms = tensor_refs(state.m);
  auto vs = tensor_refs(state.v);
  for (std::size_t k = 0; k < th.size(); ++k) {
    double* t_ = th[k].data;
    const double* g_ = gr[k].data;
    double* m_ = ms[k].data;
    double* v_ = vs[k].data;
    const auto n = th[k].size();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = g_[i];
      if (!std::isfinite(g)) throw numeric_error("non-finite gradient in " + th[k].name);
      m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * g;
      v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      t_[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

namespace {

struct BlockLossResult {
  double loss_sum = 0.0;
  Vec prob;
};

/// Forward+backward over one contiguous block of batch samples; gradients and
/// losses land in block-local buffers.
void block_grad(const HebrParams& params, const Dataset& d, const NormStats& norm,
                const std::vector<Sample>& samples, const std::vector<int>& order, int lo,
                int hi, double pos_weight, double inv_batch, HebrParams& grad_out,
                double& loss_out) {
  std::vector<Sample> block;
  block.reserve(static_cast<std::size_t>(hi - lo));
  for (int i = lo; i < hi; ++i) {
    block.push_back(samples[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  }
  NetInput in = build_input(d, norm, params.cfg, block);
  NetCache cache;
  const Vec prob = net_forward(params, in, cache);
  const int B = static_cast<int>(block.size());
  Vec dprob(B);
  double loss = 0.0;
  for (int b = 0; b < B; ++b) {
    const int y = block[static_cast<std::size_t>(b)].label;
    loss += weighted_bce(prob(b), y, pos_weight);
    dprob(b) = weighted_bce_dp(prob(b), y, pos_weight) * inv_batch;
  }
  net_backward(params, cache, dprob, grad_out);
  loss_out = loss;
}

}  // namespace

double evaluate_loss(const HebrParams& p, const Dataset& d, const NormStats& norm,
                     const std::vector<Sample>& samples, double pos_weight, int threads) {
  if (samples.empty()) return 0.0;
  const ScoreResult scored = score_samples(p, d, norm, samples, threads);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    total += weighted_bce(scored.prob(static_cast<Eigen::Index>(i)), samples[i].label,
                          pos_weight);
  }
  return total / static_cast<double>(samples.size());
}

TrainResult train_model(const TrainConfig& tc, const HebrConfig& mc, const Dataset& d,
                        const std::vector<Sample>& train, const std::vector<Sample>& val,
                        const NormStats& norm) {
  tc.validate();
  mc.validate();
  if (train.empty() || val.empty()) throw data_error("train and validation sets must be nonempty");

  std::int64_t pos = 0;
  for (const auto& s : train) pos += s.label;
  double pos_weight = tc.pos_weight_fixed;
  if (tc.pos_weight_auto) {
    if (pos == 0) {
      throw config_error(
          "no positive samples in the train set; use a fixed positive-class weight");
    }
    pos_weight =
        static_cast<double>(static_cast<std::int64_t>(train.size()) - pos) / static_cast<double>(pos);
  }

  const auto t0 = std::chrono::steady_clock::now();
  const int threads = resolve_threads(tc.threads);

  HebrParams params = make_params(mc);
  Rng init_rng = Rng(tc.rng_seed).substream(0xA11);
  init_params(params, init_rng);
  AdamState adam = make_adam_state(mc);

  const int n = static_cast<int>(train.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.report.pos_weight = pos_weight;
  HebrParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int stale = 0;

  const int n_block_slots = (std::min(tc.batch_size, n) + kGradBlock - 1) / kGradBlock;
  std::vector<HebrParams> block_grads;
  block_grads.reserve(static_cast<std::size_t>(n_block_slots));
  for (int i = 0; i < n_block_slots; ++i) block_grads.push_back(make_params(mc));
  std::vector<double> block_losses(static_cast<std::size_t>(n_block_slots));

  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    Rng shuffle_rng = Rng(tc.rng_seed).substream(0xE90C4 + static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    const double lr = lr_at(epoch, tc);

    double epoch_loss = 0.0;
    std::int64_t seen = 0;
    for (int start = 0; start < n; start += tc.batch_size) {
      const int stop = std::min(n, start + tc.batch_size);
      const int bsz = stop - start;
      const double inv_batch = 1.0 / static_cast<double>(bsz);
      const int blocks = (bsz + kGradBlock - 1) / kGradBlock;

      parallel_for(blocks, threads, [&](int blk) {
        auto refs = tensor_refs(block_grads[static_cast<std::size_t>(blk)]);
        for (auto& r : refs) Eigen::Map<Vec>(r.data, r.size()).setZero();
        const int lo = start + blk * kGradBlock;
        const int hi = std::min(stop, lo + kGradBlock);
        block_grad(params, d, norm, train, order, lo, hi, pos_weight, inv_batch,
                   block_grads[static_cast<std::size_t>(blk)],
                   block_losses[static_cast<std::size_t>(blk)]);
      });

      // ordered reduction: block 0, block 1, ... regardless of thread count
      HebrParams& batch_grad = block_grads[0];
      double batch_loss = block_losses[0];
      auto acc = tensor_refs(batch_grad);
      for (int blk = 1; blk < blocks; ++blk) {
        auto src = tensor_refs(block_grads[static_cast<std::size_t>(blk)]);
        for (std::size_t k = 0; k < acc.size(); ++k) {
          Eigen::Map<Vec>(acc[k].data, acc[k].size()) +=
              Eigen::Map<const Vec>(src[k].data, src[k].size());
        }
        batch_loss += block_losses[static_cast<std::size_t>(blk)];
      }
      adam_step(params, batch_grad, adam, lr, tc);
      epoch_loss += batch_loss;
      seen += bsz;
    }

    const double train_loss = epoch_loss / static_cast<double>(seen);
    const double val_loss = evaluate_loss(params, d, norm, val, pos_weight, threads);
    const ScoreResult val_scored = score_samples(params, d, norm, val, threads);
    std::vector<int> val_labels(val.size());
    for (std::size_t i = 0; i < val.size(); ++i) val_labels[i] = val[i].label;
    const MetricsReport vm = make_report(val_scored.prob, val_labels, 0.5);
    result.report.epochs.push_back({epoch, train_loss, val_loss, vm.f05, lr});

    if (val_loss < best_val) {
      best_val = val_loss;
      best = params;
      best_epoch = epoch;
      stale = 0;
    } else if (++stale >= tc.patience) {
      break;
    }
  }

  result.params = std::move(best);
  result.report.best_epoch = best_epoch;
  result.report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

void write_train_report_csv(const TrainReport& report, const std::string& path) {
  CsvWriter w(path, {"epoch", "train_loss", "val_loss", "val_f05", "lr"});
  for (const auto& row : report.epochs) {
    w.cell(static_cast<std::int64_t>(row.epoch));
    w.cell(row.train_loss);
    w.cell(row.val_loss);
    w.cell(row.val_f05);
    w.cell(row.lr);
    w.end_row();
  }
}

GradCheckReport grad_check(const HebrConfig& cfg, std::uint64_t seed, int batch, double step) {
  Rng rng(seed);
  HebrParams params = make_params(cfg);
  init_params(params, rng);

  // synthetic inputs in roughly normalized range
  const int T = cfg.window_days;
  NetInput in;
  const int e_dim = cfg.flat_concat ? HebrConfig::kFlatDim : HebrConfig::kUsageDim;
  in.e.assign(static_cast<std::size_t>(T), Mat(batch, e_dim));
  if (!cfg.flat_concat && cfg.use_ntl) in.l.assign(static_cast<std::size_t>(T), Mat(batch, 1));
  if (!cfg.flat_concat && cfg.use_temperature) {
    in.c.assign(static_cast<std::size_t>(T), Mat(batch, 2));
  }
  auto fill = [&rng](MatSeq& seq) {
    for (auto& m : seq) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.normal();
      }
    }
  };
  fill(in.e);
  fill(in.l);
  fill(in.c);
  std::vector<int> labels(static_cast<std::size_t>(batch));
  for (auto& y : labels) y = rng.bernoulli(0.5) ? 1 : 0;
  const double pos_weight = 2.5;

  auto loss_at = [&]() {
    NetCache cache;
    const Vec prob = net_forward(params, in, cache);
    double loss = 0.0;
    for (int b = 0; b < batch; ++b) {
      loss += weighted_bce(prob(b), labels[static_cast<std::size_t>(b)], pos_weight);
    }
    return loss / static_cast<double>(batch);
  };

  // analytic gradients
  HebrParams grads = make_params(cfg);
  {
    NetCache cache;
    const Vec prob = net_forward(params, in, cache);
    Vec dprob(batch);
    for (int b = 0; b < batch; ++b) {
      dprob(b) = weighted_bce_dp(prob(b), labels[static_cast<std::size_t>(b)], pos_weight) /
                 static_cast<double>(batch);
    }
    net_backward(params, cache, dprob, grads);
  }

  GradCheckReport report;
  report.variant = cfg.variant_name();
  auto prefs = tensor_refs(params);
  auto grefs = tensor_refs(grads);
  for (std::size_t k = 0; k < prefs.size(); ++k) {
    GradTensorCheck tc{prefs[k].name, 0.0};
    for (Eigen::Index i = 0; i < prefs[k].size(); ++i) {
      double& theta = prefs[k].data[i];
      const double saved = theta;
      theta = saved + step;
      const double up = loss_at();
      theta = saved - step;
      const double down = loss_at();
      theta = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = grefs[k].data[i];
      const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-7});
      tc.max_rel_err = std::max(tc.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, tc.max_rel_err);
    report.tensors.push_back(std::move(tc));
  }
  return report;
}

}  // namespace hebr
