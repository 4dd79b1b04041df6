#include "hebr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>

#include "hebr/csv.hpp"
#include "hebr/dates.hpp"
#include "hebr/errors.hpp"
#include "hebr/rng.hpp"
#include "hebr/series.hpp"
#include "hebr/threading.hpp"

namespace hebr {

namespace {
// substream keys
constexpr std::uint64_t kAreaStream = 0x0A12EA00;
constexpr std::uint64_t kUserStream = 0x05E70000;
}  // namespace

void GeneratorConfig::validate() const {
  if (n_areas < 1 || users_per_area < 1) throw config_error("need at least one area and user");
  if (n_days < 1) throw config_error("n_days must be positive");
  if (theft.rate < 0.0 || theft.rate > 1.0) throw config_error("theft rate must lie in [0, 1]");
  if (!(theft.rho_lo > 0.0 && theft.rho_hi < 1.0 && theft.rho_lo <= theft.rho_hi)) {
    throw config_error("theft skim range must satisfy 0 < lo <= hi < 1");
  }
  if (theft.min_exposure_lo_days < 1 || theft.min_exposure_hi_days < theft.min_exposure_lo_days) {
    throw config_error("invalid theft exposure range");
  }
  if (theft.investigation_period_days < 1) throw config_error("investigation period must be >= 1");
  if (theft.first_checkpoint_day > theft.last_checkpoint_day ||
      theft.last_checkpoint_day >= n_days) {
    throw config_error("checkpoint day range must fit inside the simulation");
  }
  if (comfort.onpeak_frac_lo < 0 || comfort.onpeak_frac_hi > 1 ||
      comfort.onpeak_frac_lo > comfort.onpeak_frac_hi) {
    throw config_error("invalid on-peak fraction range");
  }
  if (ntl_noise_mean_kwh < 0 || ntl_noise_sd_kwh < 0) {
    throw config_error("NTL noise parameters must be nonnegative");
  }
  parse_iso_date(start_date);  // throws on malformed input
}

bool GroundTruth::is_thief(int user_idx) const {
  return std::binary_search(thief_users.begin(), thief_users.end(), user_idx);
}

namespace {

struct TheftDraw {
  int start = 0, end = 0;  // [start, end), end is the checkpoint
  double rho = 0.0;
};

// Catch days are multiples of the investigation period. A thief starting at b
// with minimum exposure E is caught at the first catch day >= b + E.
std::vector<TheftDraw> draw_theft_intervals(Rng& rng, const TheftParams& tp) {
  std::vector<TheftDraw> out;
  const int P = tp.investigation_period_days;
  const int first_slot = (tp.first_checkpoint_day + P - 1) / P;
  const int last_slot = tp.last_checkpoint_day / P;
  if (first_slot > last_slot) return out;

  auto draw_one = [&](int min_start, int max_checkpoint_slot) -> bool {
    const int exposure =
        static_cast<int>(rng.uniform_int(tp.min_exposure_lo_days, tp.min_exposure_hi_days));
    // pick the checkpoint slot, then a start consistent with it
    int lo_slot = std::max(first_slot, (min_start + exposure + P - 1) / P);
    if (lo_slot > max_checkpoint_slot) return false;
    const int slot = static_cast<int>(rng.uniform_int(lo_slot, max_checkpoint_slot));
    const int c = slot * P;
    int b_lo = std::max(min_start, c - exposure - P + 1);
    const int b_hi = c - exposure;
    if (b_lo > b_hi) return false;
    const int b = static_cast<int>(rng.uniform_int(b_lo, b_hi));
    out.push_back({b, c, rng.uniform(tp.rho_lo, tp.rho_hi)});
    return true;
  };

  if (!draw_one(1, last_slot)) return out;
  if (rng.bernoulli(tp.second_interval_prob)) {
    const int next_min_start = out.back().end + tp.rest_days_after_checkpoint;
    draw_one(next_min_start, last_slot);
  }
  return out;
}

}  // namespace

std::pair<Dataset, GroundTruth> generate(const GeneratorConfig& cfg) {
  cfg.validate();
  const int n_users = cfg.n_areas * cfg.users_per_area;
  const std::int64_t start = parse_iso_date(cfg.start_date);
  const Rng master(cfg.rng_seed);

  Dataset d;
  d.start_ordinal = start;
  d.n_days = cfg.n_days;
  d.provenance = "synthetic seed " + std::to_string(cfg.rng_seed);
  d.users.resize(static_cast<std::size_t>(n_users));
  d.checkpoints.assign(static_cast<std::size_t>(n_users), {});
  d.area_ids.resize(static_cast<std::size_t>(cfg.n_areas));

  GroundTruth gt;
  gt.true_usage = Mat::Zero(n_users, cfg.n_days);
  gt.area_skim = Mat::Zero(cfg.n_areas, cfg.n_days);
  gt.area_noise = Mat::Zero(cfg.n_areas, cfg.n_days);
  std::vector<std::vector<TheftInterval>> per_area_intervals(
      static_cast<std::size_t>(cfg.n_areas));

  const double two_pi = 2.0 * std::numbers::pi;

  // Areas are independent given their substreams, so this loop parallelizes
  // without affecting the output.
  parallel_for(cfg.n_areas, resolve_threads(0), [&](int a) {
    char area_id[16];
    std::snprintf(area_id, sizeof(area_id), "a%03d", a);
    d.area_ids[static_cast<std::size_t>(a)] = area_id;

    Rng arng = master.substream(kAreaStream + static_cast<std::uint64_t>(a));
    const double area_offset = arng.normal(0.0, cfg.seasonal.area_offset_sd_c);

    Vec temp_avg(cfg.n_days), tmax(cfg.n_days), tmin(cfg.n_days);
    for (int t = 0; t < cfg.n_days; ++t) {
      const int doy = day_of_year(start + t);
      const double seasonal =
          cfg.seasonal.mean_c +
          cfg.seasonal.amplitude_c *
              std::cos(two_pi * (doy - cfg.seasonal.peak_day_of_year) / 365.25);
      temp_avg(t) = seasonal + area_offset + arng.normal(0.0, cfg.seasonal.daily_noise_sd_c);
      const double spread = std::max(0.5, cfg.seasonal.minmax_spread_c + arng.normal(0.0, 0.5));
      tmax(t) = temp_avg(t) + spread / 2.0;
      tmin(t) = temp_avg(t) - spread / 2.0;
    }
    Vec ntl_noise(cfg.n_days);
    for (int t = 0; t < cfg.n_days; ++t) {
      ntl_noise(t) = std::max(0.0, arng.normal(cfg.ntl_noise_mean_kwh, cfg.ntl_noise_sd_kwh));
    }
    gt.area_noise.row(a) = ntl_noise.transpose();

    Vec skim_total = Vec::Zero(cfg.n_days);
    for (int lu = 0; lu < cfg.users_per_area; ++lu) {
      const int u = a * cfg.users_per_area + lu;
      Rng urng = master.substream(kUserStream + static_cast<std::uint64_t>(u));

      const bool thief = urng.bernoulli(cfg.theft.rate);
      double base = std::max(cfg.comfort.base_min_kwh,
                             urng.normal(cfg.comfort.base_mean_kwh, cfg.comfort.base_sd_kwh));
      double kappa = std::max(cfg.comfort.quad_coeff_min,
                              urng.normal(cfg.comfort.quad_coeff_mean, cfg.comfort.quad_coeff_sd));
      const double comfort = urng.uniform(cfg.comfort.comfort_lo_c, cfg.comfort.comfort_hi_c);
      const double onpeak_base =
          urng.uniform(cfg.comfort.onpeak_frac_lo, cfg.comfort.onpeak_frac_hi);
      if (thief) {
        base *= 1.0 + cfg.comfort.thief_shift;
        kappa *= 1.0 + cfg.comfort.thief_shift;
      }

      std::vector<TheftDraw> thefts;
      if (thief) thefts = draw_theft_intervals(urng, cfg.theft);

      UserStream& us = d.users[static_cast<std::size_t>(u)];
      char user_id[16];
      std::snprintf(user_id, sizeof(user_id), "u%05d", u);
      us.user_id = user_id;
      us.area_idx = a;
      us.days.resize(cfg.n_days, kNumChannels);

      for (int t = 0; t < cfg.n_days; ++t) {
        const double gap = temp_avg(t) - comfort;
        const double truth = std::max(
            0.0, base + kappa * gap * gap + urng.normal(0.0, cfg.comfort.usage_noise_sd_kwh));
        gt.true_usage(u, t) = truth;

        double rho = 0.0;
        for (const auto& th : thefts) {
          if (t >= th.start && t < th.end) {
            rho = th.rho;
            break;
          }
        }
        const double recorded = truth * (1.0 - rho);
        skim_total(t) += truth * rho;

        const double frac = std::clamp(onpeak_base + urng.normal(0.0, 0.05), 0.05, 0.95);
        us.days(t, kUsageTotal) = recorded;
        us.days(t, kUsageOnPeak) = recorded * frac;
        us.days(t, kUsageOffPeak) = recorded - recorded * frac;
        us.days(t, kTempMax) = tmax(t);
        us.days(t, kTempMin) = tmin(t);
      }

      for (const auto& th : thefts) {
        per_area_intervals[static_cast<std::size_t>(a)].push_back(
            TheftInterval{u, th.start, th.end, th.rho});
        d.checkpoints[static_cast<std::size_t>(u)].push_back(th.end);
      }
    }

    gt.area_skim.row(a) = skim_total.transpose();
    const Vec ntl = ntl_noise + skim_total;
    for (int lu = 0; lu < cfg.users_per_area; ++lu) {
      const int u = a * cfg.users_per_area + lu;
      d.users[static_cast<std::size_t>(u)].days.col(kNtl) = ntl;
    }
  });

  for (auto& per_area : per_area_intervals) {
    gt.intervals.insert(gt.intervals.end(), per_area.begin(), per_area.end());
  }
  std::sort(gt.intervals.begin(), gt.intervals.end(), [](const auto& x, const auto& y) {
    return std::tie(x.user_idx, x.start_day) < std::tie(y.user_idx, y.start_day);
  });
  for (const auto& iv : gt.intervals) {
    if (gt.thief_users.empty() || gt.thief_users.back() != iv.user_idx) {
      gt.thief_users.push_back(iv.user_idx);
    }
  }
  return {std::move(d), std::move(gt)};
}

void write_ground_truth_csv(const Dataset& d, const GroundTruth& gt, const std::string& path) {
  CsvWriter w(path, {"user_id", "theft_start", "theft_end", "rho"});
  for (const auto& iv : gt.intervals) {
    w.cell(d.users[static_cast<std::size_t>(iv.user_idx)].user_id);
    w.cell(format_iso_date(d.start_ordinal + iv.start_day));
    w.cell(format_iso_date(d.start_ordinal + iv.end_day));
    w.cell(iv.rho);
    w.end_row();
  }
}

std::vector<TheftInterval> load_ground_truth_csv(const std::string& path, const Dataset& d) {
  std::map<std::string, int> user_index;
  for (std::size_t i = 0; i < d.users.size(); ++i) {
    user_index.emplace(d.users[i].user_id, static_cast<int>(i));
  }
  CsvReader r(path);
  const auto cu = r.column("user_id"), cs = r.column("theft_start"), ce = r.column("theft_end");
  const auto cr = r.column("rho");
  std::vector<TheftInterval> out;
  std::vector<std::string> f;
  while (r.next(f)) {
    const auto it = user_index.find(f[cu]);
    if (it == user_index.end()) {
      throw data_error(r.location() + ": ground truth for unknown user " + f[cu]);
    }
    TheftInterval iv;
    iv.user_idx = it->second;
    iv.start_day = static_cast<int>(r.to_date(f[cs]) - d.start_ordinal);
    iv.end_day = static_cast<int>(r.to_date(f[ce]) - d.start_ordinal);
    iv.rho = r.to_double(f[cr]);
    out.push_back(iv);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return std::tie(x.user_idx, x.start_day) < std::tie(y.user_idx, y.start_day);
  });
  return out;
}

DiagnosticsReport diagnose(const Dataset& d, const std::vector<TheftInterval>& intervals) {
  DiagnosticsReport rep;
  rep.has_thieves = !intervals.empty();

  std::vector<bool> is_thief(d.users.size(), false);
  for (const auto& iv : intervals) is_thief[static_cast<std::size_t>(iv.user_idx)] = true;

  // (1) recorded usage jump across checkpoints, 30-day spans either side
  if (rep.has_thieves) {
    double delta_sum = 0.0;
    int cases = 0;
    for (const auto& iv : intervals) {
      const int c = iv.end_day;
      if (c - 30 < 0 || c + 30 > d.n_days) continue;
      const auto& days = d.users[static_cast<std::size_t>(iv.user_idx)].days;
      const double pre = days.col(kUsageTotal).segment(c - 30, 30).mean();
      const double post = days.col(kUsageTotal).segment(c, 30).mean();
      delta_sum += post - pre;
      ++cases;
    }
    if (cases > 0) {
      rep.post_pre_available = true;
      rep.post_pre_delta_kwh = delta_sum / cases;
      rep.post_pre_cases = cases;
    }
  }

  // (2) autumn slope of never-thief users over the first covered Sep 1 - Oct 31
  {
    int autumn_offset = -1;
    for (int t = 0; t + 61 <= d.n_days; ++t) {
      const CivilDate c = civil_from_days(d.start_ordinal + t);
      if (c.month == 9 && c.day == 1) {
        autumn_offset = t;
        break;
      }
    }
    if (autumn_offset >= 0) {
      int negative = 0, total = 0;
      for (std::size_t u = 0; u < d.users.size(); ++u) {
        if (is_thief[u]) continue;
        const auto span = d.users[u].days.col(kUsageTotal).segment(autumn_offset, 61);
        if (ols_slope(span) < 0.0) ++negative;
        ++total;
      }
      if (total > 0) {
        rep.autumn_available = true;
        rep.autumn_users = total;
        rep.negative_autumn_slope_frac = static_cast<double>(negative) / total;
      }
    }
  }

  // (3) thief-vs-normal usage distance under extreme vs mid-range temperature
  if (rep.has_thieves) {
    std::vector<double> thief_ext, norm_ext, thief_mid, norm_mid;
    for (std::size_t u = 0; u < d.users.size(); ++u) {
      const auto& days = d.users[u].days;
      for (int t = 0; t < d.n_days; ++t) {
        const double avg = 0.5 * (days(t, kTempMax) + days(t, kTempMin));
        const double usage = days(t, kUsageTotal);
        if (avg > 30.0 || avg < 0.0) {
          (is_thief[u] ? thief_ext : norm_ext).push_back(usage);
        } else if (avg >= 10.0 && avg <= 25.0) {
          (is_thief[u] ? thief_mid : norm_mid).push_back(usage);
        }
      }
    }
    if (!thief_ext.empty() && !norm_ext.empty() && !thief_mid.empty() && !norm_mid.empty()) {
      rep.wasserstein_available = true;
      rep.dw_extreme = wasserstein1d(Eigen::Map<const Vec>(thief_ext.data(),
                                                           static_cast<Eigen::Index>(thief_ext.size())),
                                     Eigen::Map<const Vec>(norm_ext.data(),
                                                           static_cast<Eigen::Index>(norm_ext.size())));
      rep.dw_mid = wasserstein1d(Eigen::Map<const Vec>(thief_mid.data(),
                                                       static_cast<Eigen::Index>(thief_mid.size())),
                                 Eigen::Map<const Vec>(norm_mid.data(),
                                                       static_cast<Eigen::Index>(norm_mid.size())));
    }
  }
  return rep;
}

bool DiagnosticsReport::all_pass() const {
  if (post_pre_available && !pass_post_pre()) return false;
  if (autumn_available && !pass_autumn()) return false;
  if (wasserstein_available && !pass_wasserstein()) return false;
  return true;
}

std::string diagnostics_text(const DiagnosticsReport& r) {
  std::ostringstream out;
  auto line = [&out](const char* name, bool available, bool pass, const std::string& detail) {
    out << name << ": " << (available ? (pass ? "pass" : "FAIL") : "absent");
    if (available) out << " (" << detail << ")";
    out << '\n';
  };
  char buf[160];
  std::snprintf(buf, sizeof(buf), "post-pre mean usage delta = %+.3f kWh over %d cases",
                r.post_pre_delta_kwh, r.post_pre_cases);
  line("checkpoint_usage_jump", r.post_pre_available, r.pass_post_pre(), buf);
  std::snprintf(buf, sizeof(buf), "%.1f%% of %d normal users slope down (floor 70%%)",
                100.0 * r.negative_autumn_slope_frac, r.autumn_users);
  line("negative_autumn_slope", r.autumn_available, r.pass_autumn(), buf);
  std::snprintf(buf, sizeof(buf), "d_w extreme = %.3f vs mid-range = %.3f", r.dw_extreme,
                r.dw_mid);
  line("temperature_band_wasserstein", r.wasserstein_available, r.pass_wasserstein(), buf);
  return out.str();
}

}  // namespace hebr
