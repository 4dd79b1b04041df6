#include "hebr/ablation.hpp"

#include "hebr/csv.hpp"

namespace hebr {

std::vector<AblationRun> default_ablation_runs(CellKind base_cell) {
  std::vector<AblationRun> runs;
  for (const char* v : {"full", "no_temperature", "no_ntl", "usage_only", "no_fusion",
                        "no_attention", "no_fusion_no_attention", "mrnn_flat"}) {
    runs.push_back({v, v, base_cell});
  }
  for (const CellKind k : {CellKind::AveragePooling, CellKind::LinearRecurrent, CellKind::Gated,
                           CellKind::LongShortTermMemory}) {
    if (k == base_cell) continue;  // already covered by the "full" row
    runs.push_back({std::string("full_") + cell_kind_name(k), "full", k});
  }
  return runs;
}

std::vector<AblationRow> run_ablation_suite(const Dataset& d, const Split& split,
                                            const NormStats& norm, const HebrConfig& base,
                                            const TrainConfig& tc,
                                            const std::vector<AblationRun>& runs,
                                            bool threshold_from_validation) {
  std::vector<AblationRow> rows;
  std::vector<int> test_labels(split.test.size());
  for (std::size_t i = 0; i < split.test.size(); ++i) test_labels[i] = split.test[i].label;

  for (const auto& run : runs) {
    HebrConfig cfg = HebrConfig::variant(run.variant, base);
    cfg.cell_kind = run.cell;
    TrainResult trained = train_model(tc, cfg, d, split.train, split.validation, norm);

    double threshold = 0.5;
    if (threshold_from_validation) {
      const ScoreResult val =
          score_samples(trained.params, d, norm, split.validation, tc.threads);
      std::vector<int> val_labels(split.validation.size());
      for (std::size_t i = 0; i < split.validation.size(); ++i) {
        val_labels[i] = split.validation[i].label;
      }
      threshold = select_threshold_max_f05(val.prob, val_labels);
    }

    const ScoreResult test = score_samples(trained.params, d, norm, split.test, tc.threads);
    AblationRow row;
    row.run = run;
    row.metrics = make_report(test.prob, test_labels, threshold);
    row.best_epoch = trained.report.best_epoch;
    row.seconds = trained.report.seconds;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
  CsvWriter w(path, {"label", "variant", "cell", "threshold", "precision", "recall", "f1", "f05",
                     "tp", "fp", "fn", "tn", "best_epoch", "seconds"});
  for (const auto& row : rows) {
    w.cell(row.run.label);
    w.cell(row.run.variant);
    w.cell(std::string(cell_kind_name(row.run.cell)));
    w.cell(row.metrics.threshold);
    w.cell(row.metrics.precision);
    w.cell(row.metrics.recall);
    w.cell(row.metrics.f1);
    w.cell(row.metrics.f05);
    w.cell(row.metrics.counts.tp);
    w.cell(row.metrics.counts.fp);
    w.cell(row.metrics.counts.fn);
    w.cell(row.metrics.counts.tn);
    w.cell(static_cast<std::int64_t>(row.best_epoch));
    w.cell(row.seconds);
    w.end_row();
  }
}

}  // namespace hebr
