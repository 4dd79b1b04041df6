#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "hebr/data.hpp"
#include "hebr/net.hpp"
#include "hebr/synth.hpp"
#include "hebr/train.hpp"

// JSON documents: run configs and model checkpoints. Unknown keys inside a
// known section are rejected so typos fail fast.

namespace hebr {

using json = nlohmann::json;

json read_json_file(const std::string& path);
void write_json_file(const json& j, const std::string& path);

HebrConfig hebr_config_from_json(const json& j);
json hebr_config_to_json(const HebrConfig& cfg);

TrainConfig train_config_from_json(const json& j);
json train_config_to_json(const TrainConfig& cfg);

GeneratorConfig generator_config_from_json(const json& j);
json generator_config_to_json(const GeneratorConfig& cfg);

SplitSpec split_spec_from_json(const json& j);
json split_spec_to_json(const SplitSpec& spec);

/// Everything a train/eval/score run needs beyond the data directory.
struct PipelineConfig {
  HebrConfig model;
  TrainConfig train;
  int window_days = 180;
  int horizon_days = 30;
  SplitSpec split;
  bool select_threshold_on_validation = false;
};

PipelineConfig pipeline_config_from_json(const json& j);
json pipeline_config_to_json(const PipelineConfig& cfg);

/// A trained model plus the preprocessing needed to reuse it: normalization
/// statistics, windowing parameters, split spec and decision threshold.
struct CheckpointBundle {
  HebrParams params;
  NormStats norm;
  int window_days = 180;
  int horizon_days = 30;
  SplitSpec split;
  double threshold = 0.5;
};

/// Parameter tensors are stored by name as nested arrays with explicit
/// shapes; loading validates every shape against the config.
void save_checkpoint(const CheckpointBundle& bundle, const std::string& path);
CheckpointBundle load_checkpoint(const std::string& path);

}  // namespace hebr
