#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace hebr {

/// Minimal CSV reader for the fixed schemas used here: comma-separated,
/// required header row, no quoting. Keeps file/line context for error
/// messages.
class CsvReader {
 public:
  explicit CsvReader(const std::string& path);

  const std::vector<std::string>& header() const { return header_; }

  /// Index of a named header column; throws data_error if absent.
  std::size_t column(const std::string& name) const;

  /// Reads the next record into `fields`; returns false at end of file.
  bool next(std::vector<std::string>& fields);

  double to_double(const std::string& field) const;
  std::int64_t to_date(const std::string& field) const;

  /// "path:line" for the record most recently returned by next().
  std::string location() const;

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::size_t line_ = 0;
};

void split_csv_line(const std::string& line, std::vector<std::string>& fields);

/// Writer with pinned float formatting so identical data gives identical bytes.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void cell(const std::string& value);
  void cell(double value);        // fixed %.6f
  void cell(std::int64_t value);
  void end_row();

 private:
  std::ofstream out_;
  bool row_open_ = false;
};

}  // namespace hebr
