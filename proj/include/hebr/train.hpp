#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hebr/net.hpp"

namespace hebr {

struct TrainConfig {
  double learning_rate = 0.01;
  int decay_every_epochs = 20;   // step decay period
  double decay_factor = 10.0;    // divide the rate by this at each step
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 256;
  int max_epochs = 60;
  int patience = 5;              // epochs without validation improvement
  bool pos_weight_auto = true;   // negative/positive ratio from the train set
  double pos_weight_fixed = 1.0;
  std::uint64_t rng_seed = 7;
  int threads = 0;               // 0 = hardware concurrency

  void validate() const;
};

/// Class-weighted binary cross-entropy for a single prediction. p is clipped
/// to [1e-7, 1-1e-7] before the logarithms; batch losses are plain means of
/// the per-sample values.
double weighted_bce(double p, int y, double pos_weight);

/// dLoss/dp matching weighted_bce, zero where the clip is active.
double weighted_bce_dp(double p, int y, double pos_weight);

/// Step-decayed learning rate: base / factor^floor(epoch / period).
double lr_at(int epoch, const TrainConfig& cfg);

/// Bias-corrected Adam over the model's tensor list. The moment buffers are
/// params-shaped and must be created from the same config.
struct AdamState {
  HebrParams m, v;
  std::int64_t t = 0;
};
AdamState make_adam_state(const HebrConfig& cfg);
void adam_step(HebrParams& theta, HebrParams& grads, AdamState& state, double lr,
               const TrainConfig& cfg);

struct EpochRow {
  int epoch;
  double train_loss, val_loss, val_f05, lr;
};

struct TrainReport {
  std::vector<EpochRow> epochs;
  int best_epoch = -1;
  double pos_weight = 1.0;
  double seconds = 0.0;
};

void write_train_report_csv(const TrainReport& report, const std::string& path);

struct TrainResult {
  HebrParams params;
  TrainReport report;
};

/// Mini-batch training with per-epoch shuffling, step-decayed Adam and early
/// stopping on validation loss; returns the best-validation checkpoint.
/// Batch gradients are reduced block-by-block in index order, so the result
/// does not depend on the thread count.
TrainResult train_model(const TrainConfig& tc, const HebrConfig& mc, const Dataset& d,
                        const std::vector<Sample>& train, const std::vector<Sample>& val,
                        const NormStats& norm);

/// Mean weighted loss of the model over a sample list.
double evaluate_loss(const HebrParams& p, const Dataset& d, const NormStats& norm,
                     const std::vector<Sample>& samples, double pos_weight, int threads);

struct GradTensorCheck {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::string variant;
  std::vector<GradTensorCheck> tensors;
  double max_rel_err = 0.0;
};

/// Central finite differences of weighted_bce(forward) against the analytic
/// gradients, for every live parameter tensor of the given config. Uses
/// synthetic inputs; intended for small configs.
GradCheckReport grad_check(const HebrConfig& cfg, std::uint64_t seed, int batch = 4,
                           double step = 1e-5);

}  // namespace hebr
