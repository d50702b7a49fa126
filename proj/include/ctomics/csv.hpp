#pragma once

#include <string>
#include <vector>

#include "ctomics/fio.hpp"

namespace ctomics {

// Plain comma-separated values, no quoting; cells must not contain ',' or
// newlines (writers reject them, the formats here never need escaping).

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  size_t start = 0;
  while (start < text.size()) {
    size_t pos = text.find('\n', start);
    std::string line = (pos == std::string::npos) ? text.substr(start)
                                                  : text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(split_csv_line(line));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return rows;
}

class CsvWriter {
 public:
  void cell(const std::string& s) {
    if (s.find(',') != std::string::npos || s.find('\n') != std::string::npos)
      fail(ErrorCode::bad_argument, "csv cell contains separator: " + s);
    if (!at_row_start_) buf_ += ',';
    buf_ += s;
    at_row_start_ = false;
  }
  void cell(double v) { cell(format_double(v)); }
  void cell_missing() { cell(std::string()); }
  void end_row() {
    buf_ += '\n';
    at_row_start_ = true;
  }
  const std::string& text() const { return buf_; }
  void save(const std::string& path) const { write_file_atomic(path, buf_); }

 private:
  std::string buf_;
  bool at_row_start_ = true;
};

}  // namespace ctomics
