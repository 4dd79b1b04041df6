#pragma once

#include <string>
#include <vector>

#include "hebr/metrics.hpp"
#include "hebr/train.hpp"

namespace hebr {

struct AblationRun {
  std::string label;
  std::string variant;  // canonical variant name
  CellKind cell = CellKind::LongShortTermMemory;
};

/// The standard grid: every architecture variant with the base cell, then the
/// remaining cell kinds on the full model.
std::vector<AblationRun> default_ablation_runs(CellKind base_cell);

struct AblationRow {
  AblationRun run;
  MetricsReport metrics;  // on the test split
  int best_epoch = -1;
  double seconds = 0.0;
};

/// Trains and evaluates each run under identical splits, normalization and
/// seed. `threshold_from_validation` picks the F0.5-maximizing validation
/// threshold per run instead of 0.5.
std::vector<AblationRow> run_ablation_suite(const Dataset& d, const Split& split,
                                            const NormStats& norm, const HebrConfig& base,
                                            const TrainConfig& tc,
                                            const std::vector<AblationRun>& runs,
                                            bool threshold_from_validation);

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

}  // namespace hebr
