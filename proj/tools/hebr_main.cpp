// Command-line front end: synthesis, training, evaluation, ablation, scoring,
// gradient checking and generator diagnostics.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "hebr/ablation.hpp"
#include "hebr/checkpoint.hpp"
#include "hebr/csv.hpp"
#include "hebr/dates.hpp"
#include "hebr/errors.hpp"
#include "hebr/features.hpp"
#include "hebr/metrics.hpp"
#include "hebr/synth.hpp"
#include "hebr/threading.hpp"

namespace fs = std::filesystem;
using hebr::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string data_dir;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool need_config, bool need_data,
                bool need_out) {
  auto* config = cmd->add_option("--config", args.config_path, "JSON config document");
  if (need_config) config->required();
  if (need_data) cmd->add_option("--data", args.data_dir, "dataset directory")->required();
  if (need_out) cmd->add_option("--out", args.out_dir, "output directory")->required();
  cmd->add_option("--seed", args.seed, "override the config RNG seed");
  cmd->add_option("--threads", args.threads,
                  "worker threads (0 = all cores; HEBR_THREADS overrides)");
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw hebr::data_error("cannot create output directory " + dir);
}

hebr::PipelineConfig load_pipeline_config(const CommonArgs& args) {
  hebr::PipelineConfig cfg;
  if (!args.config_path.empty()) {
    cfg = hebr::pipeline_config_from_json(hebr::read_json_file(args.config_path));
  }
  if (args.seed) cfg.train.rng_seed = *args.seed;
  if (args.threads > 0) cfg.train.threads = args.threads;
  return cfg;
}

struct WindowedData {
  hebr::Dataset dataset;
  std::vector<hebr::Sample> samples;
  hebr::Split split;
};

WindowedData prepare_data(const std::string& dir, int window_days, int horizon_days,
                          const hebr::SplitSpec& spec) {
  WindowedData wd;
  wd.dataset = hebr::load_dataset_dir(dir);
  auto windows = hebr::window_samples(wd.dataset, window_days, horizon_days);
  if (windows.skipped_streams > 0) {
    std::cerr << "warning: skipped " << windows.skipped_streams
              << " streams shorter than window + horizon\n";
  }
  wd.samples = std::move(windows.samples);
  wd.split = hebr::split_by_time(wd.samples, spec);
  return wd;
}

std::vector<int> labels_of(const std::vector<hebr::Sample>& samples) {
  std::vector<int> y(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) y[i] = samples[i].label;
  return y;
}

int cmd_synth(const CommonArgs& args) {
  hebr::GeneratorConfig cfg;
  if (!args.config_path.empty()) {
    cfg = hebr::generator_config_from_json(hebr::read_json_file(args.config_path));
  }
  if (args.seed) cfg.rng_seed = *args.seed;
  ensure_out_dir(args.out_dir);
  auto [dataset, gt] = hebr::generate(cfg);
  hebr::write_dataset_csvs(dataset, args.out_dir);
  hebr::write_ground_truth_csv(dataset, gt, args.out_dir + "/ground_truth.csv");
  hebr::write_json_file(hebr::generator_config_to_json(cfg), args.out_dir + "/config.json");
  std::cout << "wrote " << dataset.users.size() << " users x " << dataset.n_days << " days, "
            << gt.intervals.size() << " theft intervals (" << gt.thief_users.size()
            << " thieves) to " << args.out_dir << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const auto cfg = load_pipeline_config(args);
  ensure_out_dir(args.out_dir);
  const auto wd = prepare_data(args.data_dir, cfg.window_days, cfg.horizon_days, cfg.split);
  const auto norm = hebr::fit_norm_stats(wd.dataset, wd.split.train);

  const auto result = hebr::train_model(cfg.train, cfg.model, wd.dataset, wd.split.train,
                                        wd.split.validation, norm);

  double threshold = 0.5;
  if (cfg.select_threshold_on_validation) {
    const auto val = hebr::score_samples(result.params, wd.dataset, norm, wd.split.validation,
                                         cfg.train.threads);
    threshold = hebr::select_threshold_max_f05(val.prob, labels_of(wd.split.validation));
  }

  hebr::CheckpointBundle bundle;
  bundle.params = result.params;
  bundle.norm = norm;
  bundle.window_days = cfg.window_days;
  bundle.horizon_days = cfg.horizon_days;
  bundle.split = cfg.split;
  bundle.threshold = threshold;
  hebr::save_checkpoint(bundle, args.out_dir + "/checkpoint.json");
  hebr::write_train_report_csv(result.report, args.out_dir + "/train_report.csv");
  hebr::write_json_file(hebr::pipeline_config_to_json(cfg), args.out_dir + "/config.json");

  std::cout << "trained " << cfg.model.variant_name() << " for " << result.report.epochs.size()
            << " epochs (best epoch " << result.report.best_epoch << ", pos weight "
            << result.report.pos_weight << ", threshold " << threshold << ") in "
            << result.report.seconds << " s\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path) {
  const auto bundle = hebr::load_checkpoint(checkpoint_path);
  ensure_out_dir(args.out_dir);
  const auto wd =
      prepare_data(args.data_dir, bundle.window_days, bundle.horizon_days, bundle.split);
  const auto scored =
      hebr::score_samples(bundle.params, wd.dataset, bundle.norm, wd.split.test, args.threads);
  const auto report = hebr::make_report(scored.prob, labels_of(wd.split.test), bundle.threshold);
  hebr::write_metrics_csv(report, args.out_dir + "/metrics.csv");
  std::cout << hebr::metrics_table({{bundle.params.cfg.variant_name(), report}});
  return 0;
}

int cmd_score(const CommonArgs& args, const std::string& checkpoint_path, int top_k) {
  const auto bundle = hebr::load_checkpoint(checkpoint_path);
  ensure_out_dir(args.out_dir);
  const auto dataset = hebr::load_dataset_dir(args.data_dir);
  auto windows = hebr::window_samples(dataset, bundle.window_days, bundle.horizon_days);

  // most recent window per user, the monthly-investigation view
  std::vector<hebr::Sample> latest;
  {
    std::vector<int> last_index(dataset.users.size(), -1);
    for (std::size_t i = 0; i < windows.samples.size(); ++i) {
      const auto& s = windows.samples[i];
      auto& slot = last_index[static_cast<std::size_t>(s.user_idx)];
      if (slot < 0 || windows.samples[static_cast<std::size_t>(slot)].start_day < s.start_day) {
        slot = static_cast<int>(i);
      }
    }
    for (const int idx : last_index) {
      if (idx >= 0) latest.push_back(windows.samples[static_cast<std::size_t>(idx)]);
    }
  }
  const auto scored = hebr::score_samples(bundle.params, dataset, bundle.norm, latest,
                                          args.threads, /*want_traces=*/true);

  std::vector<int> order(latest.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scored.prob(a) != scored.prob(b)) return scored.prob(a) > scored.prob(b);
    return dataset.users[static_cast<std::size_t>(latest[static_cast<std::size_t>(a)].user_idx)]
               .user_id <
           dataset.users[static_cast<std::size_t>(latest[static_cast<std::size_t>(b)].user_idx)]
               .user_id;
  });

  hebr::CsvWriter w(args.out_dir + "/suspects.csv",
                    {"user_id", "window_start", "probability", "alpha_elc"});
  const int rows = std::min<int>(top_k, static_cast<int>(order.size()));
  for (int r = 0; r < rows; ++r) {
    const int i = order[static_cast<std::size_t>(r)];
    const auto& s = latest[static_cast<std::size_t>(i)];
    w.cell(dataset.users[static_cast<std::size_t>(s.user_idx)].user_id);
    w.cell(hebr::format_iso_date(dataset.start_ordinal + s.start_day));
    w.cell(scored.prob(i));
    std::string trace;
    if (scored.alpha_elc.size() > 0) {
      char buf[32];
      for (Eigen::Index t = 0; t < scored.alpha_elc.cols(); ++t) {
        std::snprintf(buf, sizeof(buf), "%.6f", scored.alpha_elc(i, t));
        if (t) trace += ';';
        trace += buf;
      }
    }
    w.cell(trace);
    w.end_row();
  }
  std::cout << "wrote " << rows << " ranked suspects to " << args.out_dir << "/suspects.csv\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  const auto cfg = load_pipeline_config(args);
  ensure_out_dir(args.out_dir);
  const auto wd = prepare_data(args.data_dir, cfg.window_days, cfg.horizon_days, cfg.split);
  const auto norm = hebr::fit_norm_stats(wd.dataset, wd.split.train);
  const auto rows = hebr::run_ablation_suite(wd.dataset, wd.split, norm, cfg.model, cfg.train,
                                             hebr::default_ablation_runs(cfg.model.cell_kind),
                                             cfg.select_threshold_on_validation);
  hebr::write_ablation_csv(rows, args.out_dir + "/ablation.csv");
  hebr::write_json_file(hebr::pipeline_config_to_json(cfg), args.out_dir + "/config.json");
  std::vector<std::pair<std::string, hebr::MetricsReport>> table;
  for (const auto& row : rows) table.emplace_back(row.run.label, row.metrics);
  std::cout << hebr::metrics_table(table);
  return 0;
}

int cmd_gradcheck(const CommonArgs& args, double tolerance) {
  hebr::HebrConfig base;
  base.window_days = 8;
  base.d_e = 4;
  base.d_l = 2;
  base.d_c = 2;
  base.d_ec = base.d_el = base.d_elc = 4;
  if (!args.config_path.empty()) {
    const auto j = hebr::read_json_file(args.config_path);
    if (j.contains("model")) base = hebr::hebr_config_from_json(j.at("model"));
  }
  const std::uint64_t seed = args.seed.value_or(20240901);
  bool ok = true;
  for (const char* variant : {"full", "no_temperature", "no_ntl", "usage_only", "no_fusion",
                              "no_attention", "no_fusion_no_attention", "mrnn_flat"}) {
    const auto cfg = hebr::HebrConfig::variant(variant, base);
    const auto report = hebr::grad_check(cfg, seed);
    const bool pass = report.max_rel_err < tolerance;
    ok = ok && pass;
    std::printf("%-24s max_rel_err=%.3e  %s\n", variant, report.max_rel_err,
                pass ? "pass" : "FAIL");
  }
  if (!ok) throw hebr::numeric_error("gradient check failed");
  return 0;
}

int cmd_diagnose(const CommonArgs& args, const std::string& ground_truth_path) {
  const auto dataset = hebr::load_dataset_dir(args.data_dir);
  const auto intervals = hebr::load_ground_truth_csv(ground_truth_path, dataset);
  const auto report = hebr::diagnose(dataset, intervals);
  std::cout << hebr::diagnostics_text(report);
  if (!report.all_pass()) {
    throw hebr::data_error("generator diagnostics failed");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source electricity-theft detection toolkit"};
  app.require_subcommand(1);

  CommonArgs synth_args, train_args, eval_args, score_args, ablate_args, grad_args, diag_args;
  std::string eval_ckpt, score_ckpt, diag_gt;
  int top_k = 20;
  double grad_tol = 1e-3;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic transformer-grid dataset");
  add_common(synth, synth_args, false, false, true);

  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_common(train, train_args, true, true, true);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_common(eval, eval_args, false, true, true);
  eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();

  auto* score = app.add_subcommand("score", "Rank users by theft probability");
  add_common(score, score_args, false, true, true);
  score->add_option("--checkpoint", score_ckpt, "model checkpoint")->required();
  score->add_option("--top-k", top_k, "rows to emit");

  auto* ablate = app.add_subcommand("ablate", "Run the variant / cell-kind ablation grid");
  add_common(ablate, ablate_args, true, true, true);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  add_common(gradcheck, grad_args, false, false, false);
  gradcheck->add_option("--tolerance", grad_tol, "max relative error allowed");

  auto* diagnose = app.add_subcommand("diagnose", "Check generator statistics against "
                                                  "the expected behavioral patterns");
  add_common(diagnose, diag_args, false, true, false);
  diagnose->add_option("--ground-truth", diag_gt, "ground_truth.csv path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args, eval_ckpt);
    if (score->parsed()) return cmd_score(score_args, score_ckpt, top_k);
    if (ablate->parsed()) return cmd_ablate(ablate_args);
    if (gradcheck->parsed()) return cmd_gradcheck(grad_args, grad_tol);
    if (diagnose->parsed()) return cmd_diagnose(diag_args, diag_gt);
  } catch (const hebr::config_error& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const hebr::data_error& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 3;
  } catch (const hebr::numeric_error& e) {
    std::cerr << "error: numeric: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
