#include "hebr/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "hebr/csv.hpp"
#include "hebr/dates.hpp"
#include "hebr/errors.hpp"

namespace hebr {

namespace {

struct DatedValues {
  std::int64_t date;
  std::array<double, 3> v;
  std::string loc;
};

// Sorts records, rejects duplicate dates, forward-fills interior gaps onto
// the [start, start+n_days) grid. Returns the number of filled days.
int densify(std::vector<DatedValues>& rows, std::int64_t start, int n_days, int n_vals,
            Mat& out, int first_col, const std::string& what) {
  std::sort(rows.begin(), rows.end(),
            [](const DatedValues& a, const DatedValues& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].date == rows[i - 1].date) {
      throw data_error(rows[i].loc + ": duplicate date for " + what);
    }
  }
  if (rows.empty()) throw data_error("no records for " + what);
  if (rows.front().date != start) {
    throw data_error(what + ": series starts " + format_iso_date(rows.front().date) +
                     ", expected " + format_iso_date(start) + " (misaligned date range)");
  }
  int filled = 0;
  std::size_t r = 0;
  std::array<double, 3> last{};
  for (int d = 0; d < n_days; ++d) {
    const std::int64_t date = start + d;
    if (r < rows.size() && rows[r].date == date) {
      last = rows[r].v;
      ++r;
    } else if (r < rows.size() && rows[r].date < date) {
      throw data_error(rows[r].loc + ": date before covered range for " + what);
    } else {
      ++filled;  // gap: carry the previous day forward
    }
    for (int k = 0; k < n_vals; ++k) out(d, first_col + k) = last[static_cast<std::size_t>(k)];
  }
  if (r < rows.size()) {
    throw data_error(rows[r].loc + ": date after covered range for " + what +
                     " (misaligned date range)");
  }
  return filled;
}

}  // namespace

Dataset load_dataset(const std::string& usage_path, const std::string& ntl_path,
                     const std::string& temperature_path, const std::string& labels_path) {
  // usage.csv drives the roster and the covered date range
  std::map<std::string, std::string> user_area;
  std::map<std::string, std::vector<DatedValues>> usage_rows;
  std::int64_t min_date = INT64_MAX, max_date = INT64_MIN;
  {
    CsvReader r(usage_path);
    const auto cu = r.column("user_id"), ca = r.column("area_id"), cd = r.column("date");
    const auto ct = r.column("total_kwh"), con = r.column("onpeak_kwh"),
               coff = r.column("offpeak_kwh");
    std::vector<std::string> f;
    while (r.next(f)) {
      const std::int64_t date = r.to_date(f[cd]);
      const double total = r.to_double(f[ct]);
      const double on = r.to_double(f[con]);
      const double off = r.to_double(f[coff]);
      if (total < 0 || on < 0 || off < 0) {
        throw data_error(r.location() + ": negative usage");
      }
      if (on + off > total + 1e-6) {
        throw data_error(r.location() + ": on-peak + off-peak exceeds total");
      }
      auto [it, inserted] = user_area.emplace(f[cu], f[ca]);
      if (!inserted && it->second != f[ca]) {
        throw data_error(r.location() + ": user " + f[cu] + " mapped to two areas");
      }
      usage_rows[f[cu]].push_back({date, {total, on, off}, r.location()});
      min_date = std::min(min_date, date);
      max_date = std::max(max_date, date);
    }
  }
  if (usage_rows.empty()) throw data_error(usage_path + ": no usage records");

  std::map<std::string, std::vector<DatedValues>> ntl_rows;
  {
    CsvReader r(ntl_path);
    const auto ca = r.column("area_id"), cd = r.column("date"), cv = r.column("ntl_kwh");
    std::vector<std::string> f;
    while (r.next(f)) {
      const double v = r.to_double(f[cv]);
      if (v < 0) throw data_error(r.location() + ": negative NTL");
      ntl_rows[f[ca]].push_back({r.to_date(f[cd]), {v, 0, 0}, r.location()});
    }
  }
  std::map<std::string, std::vector<DatedValues>> temp_rows;
  {
    CsvReader r(temperature_path);
    const auto ca = r.column("area_id"), cd = r.column("date");
    const auto cmax = r.column("tmax_c"), cmin = r.column("tmin_c");
    std::vector<std::string> f;
    while (r.next(f)) {
      const double tmax = r.to_double(f[cmax]);
      const double tmin = r.to_double(f[cmin]);
      if (tmax < tmin) throw data_error(r.location() + ": tmax below tmin");
      temp_rows[f[ca]].push_back({r.to_date(f[cd]), {tmax, tmin, 0}, r.location()});
    }
  }

  Dataset d;
  d.start_ordinal = min_date;
  d.n_days = static_cast<int>(max_date - min_date) + 1;
  d.provenance = usage_path;

  // Densify the per-area series once, then replicate into user streams.
  std::map<std::string, int> area_index;
  std::vector<Mat> area_series;  // n_days x 3: ntl, tmax, tmin
  std::vector<int> area_filled;
  for (const auto& [user, area] : user_area) {
    if (area_index.count(area)) continue;
    const auto ntl_it = ntl_rows.find(area);
    if (ntl_it == ntl_rows.end()) {
      throw data_error(ntl_path + ": user " + user + " references area " + area +
                       " with no NTL records");
    }
    const auto temp_it = temp_rows.find(area);
    if (temp_it == temp_rows.end()) {
      throw data_error(temperature_path + ": user " + user + " references area " + area +
                       " with no temperature records");
    }
    Mat series(d.n_days, 3);
    int filled = 0;
    filled += densify(ntl_it->second, min_date, d.n_days, 1, series, 0, "area " + area + " NTL");
    filled += densify(temp_it->second, min_date, d.n_days, 2, series, 1,
                      "area " + area + " temperature");
    area_index.emplace(area, static_cast<int>(d.area_ids.size()));
    d.area_ids.push_back(area);
    area_series.push_back(std::move(series));
    area_filled.push_back(filled);
  }

  for (auto& [user, rows] : usage_rows) {
    UserStream s;
    s.user_id = user;
    s.area_idx = area_index.at(user_area.at(user));
    s.days.resize(d.n_days, kNumChannels);
    s.filled_days = densify(rows, min_date, d.n_days, 3, s.days, 0, "user " + user + " usage");
    s.filled_days += area_filled[static_cast<std::size_t>(s.area_idx)];
    s.days.block(0, kNtl, d.n_days, 3) = area_series[static_cast<std::size_t>(s.area_idx)];
    d.users.push_back(std::move(s));
  }

  d.checkpoints.assign(d.users.size(), {});
  std::map<std::string, int> user_index;
  for (std::size_t i = 0; i < d.users.size(); ++i) user_index.emplace(d.users[i].user_id, i);
  {
    CsvReader r(labels_path);
    const auto cu = r.column("user_id"), cd = r.column("checkpoint_date");
    std::vector<std::string> f;
    while (r.next(f)) {
      const auto it = user_index.find(f[cu]);
      if (it == user_index.end()) {
        throw data_error(r.location() + ": label for unknown user " + f[cu]);
      }
      const std::int64_t date = r.to_date(f[cd]);
      d.checkpoints[static_cast<std::size_t>(it->second)].push_back(
          static_cast<int>(date - d.start_ordinal));
    }
  }
  for (auto& cps : d.checkpoints) std::sort(cps.begin(), cps.end());
  return d;
}

Dataset load_dataset_dir(const std::string& dir) {
  return load_dataset(dir + "/usage.csv", dir + "/ntl.csv", dir + "/temperature.csv",
                      dir + "/labels.csv");
}

void write_dataset_csvs(const Dataset& d, const std::string& dir) {
  CsvWriter usage(dir + "/usage.csv",
                  {"user_id", "area_id", "date", "total_kwh", "onpeak_kwh", "offpeak_kwh"});
  // Round to the written precision first so total = onpeak + offpeak survives
  // the decimal round trip exactly.
  auto r6 = [](double x) { return std::round(x * 1e6) / 1e6; };
  for (const auto& u : d.users) {
    for (int t = 0; t < d.n_days; ++t) {
      const double total = r6(u.days(t, kUsageTotal));
      const double onpeak = std::min(r6(u.days(t, kUsageOnPeak)), total);
      usage.cell(u.user_id);
      usage.cell(d.area_ids[static_cast<std::size_t>(u.area_idx)]);
      usage.cell(format_iso_date(d.start_ordinal + t));
      usage.cell(total);
      usage.cell(onpeak);
      usage.cell(total - onpeak);
      usage.end_row();
    }
  }

  // Area-level files come from the first user seen in each area.
  std::vector<const UserStream*> area_rep(d.area_ids.size(), nullptr);
  for (const auto& u : d.users) {
    auto& slot = area_rep[static_cast<std::size_t>(u.area_idx)];
    if (!slot) slot = &u;
  }
  CsvWriter ntl(dir + "/ntl.csv", {"area_id", "date", "ntl_kwh"});
  CsvWriter temp(dir + "/temperature.csv", {"area_id", "date", "tmax_c", "tmin_c"});
  for (std::size_t a = 0; a < d.area_ids.size(); ++a) {
    if (!area_rep[a]) continue;
    for (int t = 0; t < d.n_days; ++t) {
      ntl.cell(d.area_ids[a]);
      ntl.cell(format_iso_date(d.start_ordinal + t));
      ntl.cell(area_rep[a]->days(t, kNtl));
      ntl.end_row();
      temp.cell(d.area_ids[a]);
      temp.cell(format_iso_date(d.start_ordinal + t));
      temp.cell(area_rep[a]->days(t, kTempMax));
      temp.cell(area_rep[a]->days(t, kTempMin));
      temp.end_row();
    }
  }

  CsvWriter labels(dir + "/labels.csv", {"user_id", "checkpoint_date"});
  for (std::size_t i = 0; i < d.users.size(); ++i) {
    for (int cp : d.checkpoints[i]) {
      labels.cell(d.users[i].user_id);
      labels.cell(format_iso_date(d.start_ordinal + cp));
      labels.end_row();
    }
  }
}

WindowingResult window_samples(const Dataset& d, int window_days, int horizon_days) {
  if (window_days < 1 || horizon_days < 1) {
    throw config_error("window_days and horizon_days must be positive");
  }
  WindowingResult out;
  for (std::size_t ui = 0; ui < d.users.size(); ++ui) {
    const int len = static_cast<int>(d.users[ui].days.rows());
    if (len < window_days + horizon_days) {
      ++out.skipped_streams;
      continue;
    }
    const auto& cps = d.checkpoints[ui];
    for (int s = 0; s + window_days + horizon_days <= len; s += horizon_days) {
      Sample smp;
      smp.user_idx = static_cast<int>(ui);
      smp.start_day = s;
      smp.window_days = window_days;
      const int h0 = s + window_days;
      const auto it = std::lower_bound(cps.begin(), cps.end(), h0);
      if (it != cps.end() && *it < h0 + horizon_days) {
        smp.label = 1;
        smp.checkpoint_day = *it;
      }
      out.samples.push_back(smp);
    }
  }
  std::sort(out.samples.begin(), out.samples.end(), [](const Sample& a, const Sample& b) {
    return std::tie(a.start_day, a.user_idx) < std::tie(b.start_day, b.user_idx);
  });
  return out;
}

Split split_by_time(const std::vector<Sample>& samples, const SplitSpec& spec) {
  if (spec.train_fraction <= 0 || spec.train_fraction >= 1 ||
      spec.validation_fraction_of_train <= 0 || spec.validation_fraction_of_train >= 1) {
    throw config_error("split fractions must lie in (0, 1)");
  }
  const auto n = samples.size();
  if (n < 3) throw data_error("too few samples to split (need at least 3)");
  const auto pool = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
  auto val = static_cast<std::size_t>(
      std::floor(spec.validation_fraction_of_train * static_cast<double>(pool)));
  if (val < 1) val = 1;  // always keep a validation sample
  if (pool <= val) throw data_error("too few samples for a train/validation split");
  Split split;
  split.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(pool - val));
  split.validation.assign(samples.begin() + static_cast<std::ptrdiff_t>(pool - val),
                          samples.begin() + static_cast<std::ptrdiff_t>(pool));
  split.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(pool), samples.end());
  return split;
}

NormStats fit_norm_stats(const Dataset& d, const std::vector<Sample>& train_samples) {
  if (train_samples.empty()) throw data_error("cannot fit normalization on an empty train set");
  std::array<double, kNumChannels> sum{}, sumsq{};
  std::int64_t count = 0;
  for (const auto& s : train_samples) {
    const auto& days = d.users[static_cast<std::size_t>(s.user_idx)].days;
    for (int t = s.start_day; t < s.start_day + s.window_days; ++t) {
      for (int c = 0; c < kNumChannels; ++c) {
        const double v = days(t, c);
        sum[static_cast<std::size_t>(c)] += v;
        sumsq[static_cast<std::size_t>(c)] += v * v;
      }
      ++count;
    }
  }
  NormStats stats;
  for (int c = 0; c < kNumChannels; ++c) {
    const double mean = sum[static_cast<std::size_t>(c)] / static_cast<double>(count);
    const double var =
        std::max(0.0, sumsq[static_cast<std::size_t>(c)] / static_cast<double>(count) - mean * mean);
    stats.channel[static_cast<std::size_t>(c)] = {mean, std::sqrt(var)};
  }
  return stats;
}

}  // namespace hebr
