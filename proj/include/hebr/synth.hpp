#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hebr/data.hpp"
#include "hebr/metrics.hpp"
#include "hebr/types.hpp"

namespace hebr {

/// Seasonal temperature model: an annual cosine around `mean_c` peaking at
/// `peak_day_of_year`, a fixed per-area offset, and daily noise. Max/min are
/// the daily average plus/minus half the (noisy) spread.
struct SeasonalParams {
  double mean_c = 17.0;
  double amplitude_c = 12.0;
  int peak_day_of_year = 201;  // late July
  double daily_noise_sd_c = 2.0;
  double minmax_spread_c = 5.0;
  double area_offset_sd_c = 1.0;
};

/// Per-user consumption model: usage is a base level plus a quadratic response
/// to the gap between the daily average temperature and the user's comfort
/// point, plus noise, clamped nonnegative. Thieves draw base and curvature
/// scaled by (1 + thief_shift).
struct ComfortParams {
  double base_mean_kwh = 8.0;
  double base_sd_kwh = 2.0;
  double base_min_kwh = 2.0;
  double quad_coeff_mean = 0.05;
  double quad_coeff_sd = 0.015;
  double quad_coeff_min = 0.01;
  double comfort_lo_c = 14.0;
  double comfort_hi_c = 18.0;
  double usage_noise_sd_kwh = 1.2;
  double onpeak_frac_lo = 0.3;
  double onpeak_frac_hi = 0.6;
  double thief_shift = 0.5;
};

/// Theft process: a thief starts skimming at a random day and is caught at the
/// first monthly investigation after a minimum exposure; the interval ends at
/// that checkpoint. A constant fraction rho of true usage is diverted and
/// lands, exactly, in the area's NTL.
struct TheftParams {
  double rate = 0.015;                 // fraction of users
  double rho_lo = 0.3;
  double rho_hi = 0.8;
  int min_exposure_lo_days = 36;
  int min_exposure_hi_days = 48;
  int investigation_period_days = 30;  // catch days are multiples of this
  int first_checkpoint_day = 180;
  int last_checkpoint_day = 330;
  double second_interval_prob = 0.75;
  int rest_days_after_checkpoint = 30;
};

struct GeneratorConfig {
  int n_areas = 20;
  int users_per_area = 100;
  int n_days = 365;
  std::string start_date = "2017-07-01";
  SeasonalParams seasonal;
  ComfortParams comfort;
  TheftParams theft;
  double ntl_noise_mean_kwh = 25.0;
  double ntl_noise_sd_kwh = 4.0;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct GroundTruth {
  std::vector<TheftInterval> intervals;  // sorted by (user, start)
  Mat true_usage;                        // users x days, pre-skim total usage
  Mat area_skim;                         // areas x days, power diverted into NTL
  Mat area_noise;                        // areas x days, NTL noise floor
  std::vector<int> thief_users;          // users with at least one interval

  bool is_thief(int user_idx) const;
};

std::pair<Dataset, GroundTruth> generate(const GeneratorConfig& cfg);

void write_ground_truth_csv(const Dataset& d, const GroundTruth& gt, const std::string& path);
std::vector<TheftInterval> load_ground_truth_csv(const std::string& path, const Dataset& d);

struct DiagnosticsReport {
  bool has_thieves = false;

  // recorded usage around checkpoints, 30-day spans
  bool post_pre_available = false;
  double post_pre_delta_kwh = 0.0;
  int post_pre_cases = 0;

  // fraction of never-thief users whose usage slopes down over Sep 1 - Oct 31
  bool autumn_available = false;
  double negative_autumn_slope_frac = 0.0;
  int autumn_users = 0;

  // thief-vs-normal usage distribution distance by temperature band
  bool wasserstein_available = false;
  double dw_extreme = 0.0;  // daily average > 30 C or < 0 C
  double dw_mid = 0.0;      // 10..25 C

  bool pass_post_pre() const { return post_pre_available && post_pre_delta_kwh > 0.0; }
  bool pass_autumn() const { return autumn_available && negative_autumn_slope_frac >= 0.70; }
  bool pass_wasserstein() const { return wasserstein_available && dw_extreme > dw_mid; }
  /// All checks that could be computed pass.
  bool all_pass() const;
};

DiagnosticsReport diagnose(const Dataset& d, const std::vector<TheftInterval>& intervals);

std::string diagnostics_text(const DiagnosticsReport& r);

}  // namespace hebr
