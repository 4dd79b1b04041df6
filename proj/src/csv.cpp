#include "hebr/csv.hpp"

#include <charconv>
#include <cstdio>

#include "hebr/dates.hpp"
#include "hebr/errors.hpp"

namespace hebr {

void split_csv_line(const std::string& line, std::vector<std::string>& fields) {
  fields.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::size_t end = (comma == std::string::npos) ? line.size() : comma;
    // trim surrounding whitespace / CR
    std::size_t a = start, b = end;
    while (a < b && (line[a] == ' ' || line[a] == '\t')) ++a;
    while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t' || line[b - 1] == '\r')) --b;
    fields.emplace_back(line.substr(a, b - a));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
}

CsvReader::CsvReader(const std::string& path) : path_(path), in_(path) {
  if (!in_) throw data_error("cannot open " + path);
  std::string line;
  if (!std::getline(in_, line)) throw data_error(path + ": empty file (header row required)");
  ++line_;
  split_csv_line(line, header_);
}

std::size_t CsvReader::column(const std::string& name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  throw data_error(path_ + ": missing required column '" + name + "'");
}

bool CsvReader::next(std::vector<std::string>& fields) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.empty() || line == "\r") continue;
    split_csv_line(line, fields);
    if (fields.size() != header_.size()) {
      throw data_error(location() + ": expected " + std::to_string(header_.size()) +
                       " fields, got " + std::to_string(fields.size()));
    }
    return true;
  }
  return false;
}

double CsvReader::to_double(const std::string& field) const {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [p, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || p != last) {
    throw data_error(location() + ": not a number: '" + field + "'");
  }
  return value;
}

std::int64_t CsvReader::to_date(const std::string& field) const {
  try {
    return parse_iso_date(field);
  } catch (const data_error& e) {
    throw data_error(location() + ": " + e.what());
  }
}

std::string CsvReader::location() const { return path_ + ":" + std::to_string(line_); }

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path) {
  if (!out_) throw data_error("cannot write " + path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

void CsvWriter::cell(const std::string& value) {
  if (row_open_) out_ << ',';
  out_ << value;
  row_open_ = true;
}

void CsvWriter::cell(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  cell(std::string(buf));
}

void CsvWriter::cell(std::int64_t value) { cell(std::to_string(value)); }

void CsvWriter::end_row() {
  out_ << '\n';
  row_open_ = false;
}

}  // namespace hebr
