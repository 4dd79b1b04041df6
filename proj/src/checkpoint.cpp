#include "hebr/checkpoint.hpp"

#include <fstream>

#include "hebr/errors.hpp"

namespace hebr {

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& context) {
  if (!j.is_object()) throw config_error(context + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw config_error(context + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw config_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error(path + ": " + e.what());
  }
  return j;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

HebrConfig hebr_config_from_json(const json& j) {
  check_keys(j,
             {"cell_kind", "window_days", "d_e", "d_l", "d_c", "d_ec", "d_el", "d_elc",
              "use_temperature", "use_ntl", "use_multistep_fusion", "use_attention",
              "flat_concat", "variant"},
             "model config");
  HebrConfig cfg;
  cfg.cell_kind = cell_kind_from_name(get_or<std::string>(j, "cell_kind", "lstm"));
  cfg.window_days = get_or(j, "window_days", cfg.window_days);
  cfg.d_e = get_or(j, "d_e", cfg.d_e);
  cfg.d_l = get_or(j, "d_l", cfg.d_l);
  cfg.d_c = get_or(j, "d_c", cfg.d_c);
  cfg.d_ec = get_or(j, "d_ec", cfg.d_ec);
  cfg.d_el = get_or(j, "d_el", cfg.d_el);
  cfg.d_elc = get_or(j, "d_elc", cfg.d_elc);
  if (j.contains("variant")) {
    cfg = HebrConfig::variant(j.at("variant").get<std::string>(), cfg);
  }
  cfg.use_temperature = get_or(j, "use_temperature", cfg.use_temperature);
  cfg.use_ntl = get_or(j, "use_ntl", cfg.use_ntl);
  cfg.use_multistep_fusion = get_or(j, "use_multistep_fusion", cfg.use_multistep_fusion);
  cfg.use_attention = get_or(j, "use_attention", cfg.use_attention);
  cfg.flat_concat = get_or(j, "flat_concat", cfg.flat_concat);
  cfg.validate();
  return cfg;
}

json hebr_config_to_json(const HebrConfig& cfg) {
  return json{{"cell_kind", cell_kind_name(cfg.cell_kind)},
              {"window_days", cfg.window_days},
              {"d_e", cfg.d_e},
              {"d_l", cfg.d_l},
              {"d_c", cfg.d_c},
              {"d_ec", cfg.d_ec},
              {"d_el", cfg.d_el},
              {"d_elc", cfg.d_elc},
              {"use_temperature", cfg.use_temperature},
              {"use_ntl", cfg.use_ntl},
              {"use_multistep_fusion", cfg.use_multistep_fusion},
              {"use_attention", cfg.use_attention},
              {"flat_concat", cfg.flat_concat}};
}

TrainConfig train_config_from_json(const json& j) {
  check_keys(j,
             {"learning_rate", "decay_every_epochs", "decay_factor", "beta1", "beta2", "eps",
              "batch_size", "max_epochs", "patience", "pos_weight_auto", "pos_weight_fixed",
              "rng_seed", "threads"},
             "train config");
  TrainConfig cfg;
  cfg.learning_rate = get_or(j, "learning_rate", cfg.learning_rate);
  cfg.decay_every_epochs = get_or(j, "decay_every_epochs", cfg.decay_every_epochs);
  cfg.decay_factor = get_or(j, "decay_factor", cfg.decay_factor);
  cfg.beta1 = get_or(j, "beta1", cfg.beta1);
  cfg.beta2 = get_or(j, "beta2", cfg.beta2);
  cfg.eps = get_or(j, "eps", cfg.eps);
  cfg.batch_size = get_or(j, "batch_size", cfg.batch_size);
  cfg.max_epochs = get_or(j, "max_epochs", cfg.max_epochs);
  cfg.patience = get_or(j, "patience", cfg.patience);
  cfg.pos_weight_auto = get_or(j, "pos_weight_auto", cfg.pos_weight_auto);
  cfg.pos_weight_fixed = get_or(j, "pos_weight_fixed", cfg.pos_weight_fixed);
  cfg.rng_seed = get_or(j, "rng_seed", cfg.rng_seed);
  cfg.threads = get_or(j, "threads", cfg.threads);
  cfg.validate();
  return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"learning_rate", cfg.learning_rate},
              {"decay_every_epochs", cfg.decay_every_epochs},
              {"decay_factor", cfg.decay_factor},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"eps", cfg.eps},
              {"batch_size", cfg.batch_size},
              {"max_epochs", cfg.max_epochs},
              {"patience", cfg.patience},
              {"pos_weight_auto", cfg.pos_weight_auto},
              {"pos_weight_fixed", cfg.pos_weight_fixed},
              {"rng_seed", cfg.rng_seed},
              {"threads", cfg.threads}};
}

GeneratorConfig generator_config_from_json(const json& j) {
  check_keys(j,
             {"n_areas", "users_per_area", "n_days", "start_date", "seasonal", "comfort", "theft",
              "ntl_noise_mean_kwh", "ntl_noise_sd_kwh", "rng_seed"},
             "generator config");
  GeneratorConfig cfg;
  cfg.n_areas = get_or(j, "n_areas", cfg.n_areas);
  cfg.users_per_area = get_or(j, "users_per_area", cfg.users_per_area);
  cfg.n_days = get_or(j, "n_days", cfg.n_days);
  cfg.start_date = get_or<std::string>(j, "start_date", cfg.start_date);
  cfg.ntl_noise_mean_kwh = get_or(j, "ntl_noise_mean_kwh", cfg.ntl_noise_mean_kwh);
  cfg.ntl_noise_sd_kwh = get_or(j, "ntl_noise_sd_kwh", cfg.ntl_noise_sd_kwh);
  cfg.rng_seed = get_or(j, "rng_seed", cfg.rng_seed);
  if (j.contains("seasonal")) {
    const json& s = j.at("seasonal");
    check_keys(s,
               {"mean_c", "amplitude_c", "peak_day_of_year", "daily_noise_sd_c",
                "minmax_spread_c", "area_offset_sd_c"},
               "seasonal config");
    cfg.seasonal.mean_c = get_or(s, "mean_c", cfg.seasonal.mean_c);
    cfg.seasonal.amplitude_c = get_or(s, "amplitude_c", cfg.seasonal.amplitude_c);
    cfg.seasonal.peak_day_of_year = get_or(s, "peak_day_of_year", cfg.seasonal.peak_day_of_year);
    cfg.seasonal.daily_noise_sd_c = get_or(s, "daily_noise_sd_c", cfg.seasonal.daily_noise_sd_c);
    cfg.seasonal.minmax_spread_c = get_or(s, "minmax_spread_c", cfg.seasonal.minmax_spread_c);
    cfg.seasonal.area_offset_sd_c = get_or(s, "area_offset_sd_c", cfg.seasonal.area_offset_sd_c);
  }
  if (j.contains("comfort")) {
    const json& c = j.at("comfort");
    check_keys(c,
               {"base_mean_kwh", "base_sd_kwh", "base_min_kwh", "quad_coeff_mean",
                "quad_coeff_sd", "quad_coeff_min", "comfort_lo_c", "comfort_hi_c",
                "usage_noise_sd_kwh", "onpeak_frac_lo", "onpeak_frac_hi", "thief_shift"},
               "comfort config");
    cfg.comfort.base_mean_kwh = get_or(c, "base_mean_kwh", cfg.comfort.base_mean_kwh);
    cfg.comfort.base_sd_kwh = get_or(c, "base_sd_kwh", cfg.comfort.base_sd_kwh);
    cfg.comfort.base_min_kwh = get_or(c, "base_min_kwh", cfg.comfort.base_min_kwh);
    cfg.comfort.quad_coeff_mean = get_or(c, "quad_coeff_mean", cfg.comfort.quad_coeff_mean);
    cfg.comfort.quad_coeff_sd = get_or(c, "quad_coeff_sd", cfg.comfort.quad_coeff_sd);
    cfg.comfort.quad_coeff_min = get_or(c, "quad_coeff_min", cfg.comfort.quad_coeff_min);
    cfg.comfort.comfort_lo_c = get_or(c, "comfort_lo_c", cfg.comfort.comfort_lo_c);
    cfg.comfort.comfort_hi_c = get_or(c, "comfort_hi_c", cfg.comfort.comfort_hi_c);
    cfg.comfort.usage_noise_sd_kwh = get_or(c, "usage_noise_sd_kwh", cfg.comfort.usage_noise_sd_kwh);
    cfg.comfort.onpeak_frac_lo = get_or(c, "onpeak_frac_lo", cfg.comfort.onpeak_frac_lo);
    cfg.comfort.onpeak_frac_hi = get_or(c, "onpeak_frac_hi", cfg.comfort.onpeak_frac_hi);
    cfg.comfort.thief_shift = get_or(c, "thief_shift", cfg.comfort.thief_shift);
  }
  if (j.contains("theft")) {
    const json& t = j.at("theft");
    check_keys(t,
               {"rate", "rho_lo", "rho_hi", "min_exposure_lo_days", "min_exposure_hi_days",
                "investigation_period_days", "first_checkpoint_day", "last_checkpoint_day",
                "second_interval_prob", "rest_days_after_checkpoint"},
               "theft config");
    cfg.theft.rate = get_or(t, "rate", cfg.theft.rate);
    cfg.theft.rho_lo = get_or(t, "rho_lo", cfg.theft.rho_lo);
    cfg.theft.rho_hi = get_or(t, "rho_hi", cfg.theft.rho_hi);
    cfg.theft.min_exposure_lo_days = get_or(t, "min_exposure_lo_days", cfg.theft.min_exposure_lo_days);
    cfg.theft.min_exposure_hi_days = get_or(t, "min_exposure_hi_days", cfg.theft.min_exposure_hi_days);
    cfg.theft.investigation_period_days =
        get_or(t, "investigation_period_days", cfg.theft.investigation_period_days);
    cfg.theft.first_checkpoint_day = get_or(t, "first_checkpoint_day", cfg.theft.first_checkpoint_day);
    cfg.theft.last_checkpoint_day = get_or(t, "last_checkpoint_day", cfg.theft.last_checkpoint_day);
    cfg.theft.second_interval_prob = get_or(t, "second_interval_prob", cfg.theft.second_interval_prob);
    cfg.theft.rest_days_after_checkpoint =
        get_or(t, "rest_days_after_checkpoint", cfg.theft.rest_days_after_checkpoint);
  }
  cfg.validate();
  return cfg;
}

json generator_config_to_json(const GeneratorConfig& cfg) {
  return json{
      {"n_areas", cfg.n_areas},
      {"users_per_area", cfg.users_per_area},
      {"n_days", cfg.n_days},
      {"start_date", cfg.start_date},
      {"seasonal",
       {{"mean_c", cfg.seasonal.mean_c},
        {"amplitude_c", cfg.seasonal.amplitude_c},
        {"peak_day_of_year", cfg.seasonal.peak_day_of_year},
        {"daily_noise_sd_c", cfg.seasonal.daily_noise_sd_c},
        {"minmax_spread_c", cfg.seasonal.minmax_spread_c},
        {"area_offset_sd_c", cfg.seasonal.area_offset_sd_c}}},
      {"comfort",
       {{"base_mean_kwh", cfg.comfort.base_mean_kwh},
        {"base_sd_kwh", cfg.comfort.base_sd_kwh},
        {"base_min_kwh", cfg.comfort.base_min_kwh},
        {"quad_coeff_mean", cfg.comfort.quad_coeff_mean},
        {"quad_coeff_sd", cfg.comfort.quad_coeff_sd},
        {"quad_coeff_min", cfg.comfort.quad_coeff_min},
        {"comfort_lo_c", cfg.comfort.comfort_lo_c},
        {"comfort_hi_c", cfg.comfort.comfort_hi_c},
        {"usage_noise_sd_kwh", cfg.comfort.usage_noise_sd_kwh},
        {"onpeak_frac_lo", cfg.comfort.onpeak_frac_lo},
        {"onpeak_frac_hi", cfg.comfort.onpeak_frac_hi},
        {"thief_shift", cfg.comfort.thief_shift}}},
      {"theft",
       {{"rate", cfg.theft.rate},
        {"rho_lo", cfg.theft.rho_lo},
        {"rho_hi", cfg.theft.rho_hi},
        {"min_exposure_lo_days", cfg.theft.min_exposure_lo_days},
        {"min_exposure_hi_days", cfg.theft.min_exposure_hi_days},
        {"investigation_period_days", cfg.theft.investigation_period_days},
        {"first_checkpoint_day", cfg.theft.first_checkpoint_day},
        {"last_checkpoint_day", cfg.theft.last_checkpoint_day},
        {"second_interval_prob", cfg.theft.second_interval_prob},
        {"rest_days_after_checkpoint", cfg.theft.rest_days_after_checkpoint}}},
      {"ntl_noise_mean_kwh", cfg.ntl_noise_mean_kwh},
      {"ntl_noise_sd_kwh", cfg.ntl_noise_sd_kwh},
      {"rng_seed", cfg.rng_seed}};
}

SplitSpec split_spec_from_json(const json& j) {
  check_keys(j, {"train_fraction", "validation_fraction_of_train"}, "split config");
  SplitSpec spec;
  spec.train_fraction = get_or(j, "train_fraction", spec.train_fraction);
  spec.validation_fraction_of_train =
      get_or(j, "validation_fraction_of_train", spec.validation_fraction_of_train);
  return spec;
}

json split_spec_to_json(const SplitSpec& spec) {
  return json{{"train_fraction", spec.train_fraction},
              {"validation_fraction_of_train", spec.validation_fraction_of_train}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
  check_keys(j,
             {"model", "train", "window_days", "horizon_days", "split",
              "select_threshold_on_validation"},
             "run config");
  PipelineConfig cfg;
  if (j.contains("model")) cfg.model = hebr_config_from_json(j.at("model"));
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  cfg.window_days = get_or(j, "window_days", cfg.window_days);
  cfg.horizon_days = get_or(j, "horizon_days", cfg.horizon_days);
  if (j.contains("split")) cfg.split = split_spec_from_json(j.at("split"));
  cfg.select_threshold_on_validation =
      get_or(j, "select_threshold_on_validation", cfg.select_threshold_on_validation);
  cfg.model.window_days = cfg.window_days;
  return cfg;
}

json pipeline_config_to_json(const PipelineConfig& cfg) {
  return json{{"model", hebr_config_to_json(cfg.model)},
              {"train", train_config_to_json(cfg.train)},
              {"window_days", cfg.window_days},
              {"horizon_days", cfg.horizon_days},
              {"split", split_spec_to_json(cfg.split)},
              {"select_threshold_on_validation", cfg.select_threshold_on_validation}};
}

namespace {

const std::array<const char*, kNumChannels> kChannelNames = {
    "usage_total", "usage_onpeak", "usage_offpeak", "ntl", "tmax", "tmin"};

}  // namespace

void save_checkpoint(const CheckpointBundle& bundle, const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["model"] = hebr_config_to_json(bundle.params.cfg);
  j["data"] = {{"window_days", bundle.window_days},
               {"horizon_days", bundle.horizon_days},
               {"split", split_spec_to_json(bundle.split)}};
  j["threshold"] = bundle.threshold;
  json norm = json::array();
  for (int c = 0; c < kNumChannels; ++c) {
    norm.push_back({{"channel", kChannelNames[static_cast<std::size_t>(c)]},
                    {"mean", bundle.norm.channel[static_cast<std::size_t>(c)].mean},
                    {"std", bundle.norm.channel[static_cast<std::size_t>(c)].std}});
  }
  j["normalization"] = norm;

  json tensors = json::object();
  auto refs = tensor_refs(const_cast<HebrParams&>(bundle.params));
  for (const auto& ref : refs) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < ref.rows; ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < ref.cols; ++c) {
        row.push_back(ref.data[c * ref.rows + r]);  // column-major storage
      }
      rows.push_back(std::move(row));
    }
    tensors[ref.name] = {{"shape", {ref.rows, ref.cols}}, {"data", std::move(rows)}};
  }
  j["tensors"] = std::move(tensors);
  write_json_file(j, path);
}

CheckpointBundle load_checkpoint(const std::string& path) {
  const json j = read_json_file(path);
  if (!j.contains("format_version") || j.at("format_version").get<int>() != 1) {
    throw config_error(path + ": unsupported checkpoint format");
  }
  CheckpointBundle bundle;
  const HebrConfig cfg = hebr_config_from_json(j.at("model"));
  bundle.params = make_params(cfg);
  const json& data = j.at("data");
  bundle.window_days = get_or(data, "window_days", bundle.window_days);
  bundle.horizon_days = get_or(data, "horizon_days", bundle.horizon_days);
  if (data.contains("split")) bundle.split = split_spec_from_json(data.at("split"));
  bundle.threshold = get_or(j, "threshold", bundle.threshold);

  const json& norm = j.at("normalization");
  if (!norm.is_array() || norm.size() != kNumChannels) {
    throw config_error(path + ": normalization block must list all six channels");
  }
  for (int c = 0; c < kNumChannels; ++c) {
    const json& entry = norm.at(static_cast<std::size_t>(c));
    if (entry.at("channel").get<std::string>() != kChannelNames[static_cast<std::size_t>(c)]) {
      throw config_error(path + ": normalization channels out of order");
    }
    bundle.norm.channel[static_cast<std::size_t>(c)] = {entry.at("mean").get<double>(),
                                                        entry.at("std").get<double>()};
  }

  const json& tensors = j.at("tensors");
  auto refs = tensor_refs(bundle.params);
  std::size_t used = 0;
  for (auto& ref : refs) {
    if (!tensors.contains(ref.name)) {
      throw config_error(path + ": checkpoint is missing tensor '" + ref.name + "'");
    }
    const json& entry = tensors.at(ref.name);
    const auto shape = entry.at("shape");
    if (shape.at(0).get<Eigen::Index>() != ref.rows ||
        shape.at(1).get<Eigen::Index>() != ref.cols) {
      throw config_error(path + ": tensor '" + ref.name + "' has shape [" +
                         std::to_string(shape.at(0).get<long>()) + ", " +
                         std::to_string(shape.at(1).get<long>()) + "], config expects [" +
                         std::to_string(ref.rows) + ", " + std::to_string(ref.cols) + "]");
    }
    const json& rows = entry.at("data");
    if (static_cast<Eigen::Index>(rows.size()) != ref.rows) {
      throw config_error(path + ": tensor '" + ref.name + "' data disagrees with its shape");
    }
    for (Eigen::Index r = 0; r < ref.rows; ++r) {
      const json& row = rows.at(static_cast<std::size_t>(r));
      if (static_cast<Eigen::Index>(row.size()) != ref.cols) {
        throw config_error(path + ": tensor '" + ref.name + "' data disagrees with its shape");
      }
      for (Eigen::Index c = 0; c < ref.cols; ++c) {
        ref.data[c * ref.rows + r] = row.at(static_cast<std::size_t>(c)).get<double>();
      }
    }
    ++used;
  }
  if (tensors.size() != used) {
    throw config_error(path + ": checkpoint carries tensors the config does not use");
  }
  return bundle;
}

}  // namespace hebr
