#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hebr/series.hpp"
#include "hebr/types.hpp"

namespace hebr {

// Per-day channel layout of a user stream.
enum Channel : int {
  kUsageTotal = 0,
  kUsageOnPeak = 1,
  kUsageOffPeak = 2,
  kNtl = 3,
  kTempMax = 4,
  kTempMin = 5,
};
constexpr int kNumChannels = 6;

/// One user's daily observations over the whole covered span, with the
/// area-level NTL and temperature series replicated alongside.
struct UserStream {
  std::string user_id;
  int area_idx = -1;
  Mat days;  // n_days x 6, channel layout above
  int filled_days = 0;  // forward-filled gaps across the user's three sources
};

/// Aligned view of one observation window inside a user stream.
class MultiSourceWindow {
 public:
  MultiSourceWindow(const Mat& stream, int start, int length)
      : stream_(&stream), start_(start), length_(length) {
    if (start < 0 || length < 1 || start + length > stream.rows()) {
      throw shape_error("window out of stream bounds");
    }
  }

  int length() const { return length_; }
  int start_day() const { return start_; }

  auto usage() const { return stream_->block(start_, kUsageTotal, length_, 3); }
  auto ntl() const { return stream_->block(start_, kNtl, length_, 1); }
  auto temperature() const { return stream_->block(start_, kTempMax, length_, 2); }
  auto channel(int c) const { return stream_->col(c).segment(start_, length_); }

  /// Daily average temperature, (max + min) / 2.
  Vec temp_avg() const {
    return 0.5 * (stream_->col(kTempMax).segment(start_, length_) +
                  stream_->col(kTempMin).segment(start_, length_));
  }

 private:
  const Mat* stream_;
  int start_;
  int length_;
};

struct Sample {
  int user_idx = -1;
  int start_day = 0;   // offset into the user stream
  int window_days = 0;
  int label = 0;
  std::optional<int> checkpoint_day;  // stream offset of the justifying checkpoint
};

struct SplitSpec {
  double train_fraction = 0.8;
  double validation_fraction_of_train = 0.1;
};

struct Split {
  std::vector<Sample> train, validation, test;
};

/// Per-channel z-score statistics, fitted on the training windows only.
struct NormStats {
  std::array<ZScoreStats, kNumChannels> channel{};
};

struct Dataset {
  std::vector<UserStream> users;
  std::vector<std::string> area_ids;
  std::vector<std::vector<int>> checkpoints;  // per user, sorted stream offsets
  std::int64_t start_ordinal = 0;             // calendar day of stream row 0
  int n_days = 0;
  std::string provenance;

  MultiSourceWindow window(const Sample& s) const {
    return MultiSourceWindow(users[static_cast<std::size_t>(s.user_idx)].days, s.start_day,
                             s.window_days);
  }
};

/// Loads the four-file CSV dataset (usage, area NTL, area temperature,
/// theft-checkpoint labels). Gaps are forward-filled and counted; structural
/// problems raise data_error naming file and line.
Dataset load_dataset(const std::string& usage_path, const std::string& ntl_path,
                     const std::string& temperature_path, const std::string& labels_path);

/// Loads usage.csv, ntl.csv, temperature.csv and labels.csv from a directory.
Dataset load_dataset_dir(const std::string& dir);

void write_dataset_csvs(const Dataset& d, const std::string& dir);

struct WindowingResult {
  std::vector<Sample> samples;  // sorted by (start_day, user_idx)
  int skipped_streams = 0;      // streams shorter than window + horizon
};

/// Sliding windows with stride equal to the horizon; a sample is positive iff
/// a confirmed checkpoint falls inside the horizon right after its window.
WindowingResult window_samples(const Dataset& d, int window_days = 180, int horizon_days = 30);

/// Contiguous time-ordered train/validation/test partition.
Split split_by_time(const std::vector<Sample>& samples, const SplitSpec& spec = {});

NormStats fit_norm_stats(const Dataset& d, const std::vector<Sample>& train_samples);

}  // namespace hebr
