#include "ctomics/feature_table.hpp"

#include <cmath>
#include <limits>
#include <unordered_set>

#include "ctomics/csv.hpp"
#include "ctomics/error.hpp"
#include "ctomics/fio.hpp"

namespace ctomics {

double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
bool is_missing(double v) { return std::isnan(v); }

FeatureTable parse_feature_table(const std::string& text) {
  auto lines = parse_csv(text);
  if (lines.empty()) fail(ErrorCode::schema_error, "feature table has no header");
  const auto& header = lines[0];
  if (header.size() < 2 || header[0] != "patient_id" || header[1] != "label")
    fail(ErrorCode::schema_error, "feature table header must start with patient_id,label");

  FeatureTable t;
  t.feature_names.assign(header.begin() + 2, header.end());
  std::unordered_set<std::string> seen;
  for (const auto& name : t.feature_names) {
    if (name.empty()) fail(ErrorCode::schema_error, "empty feature column name");
    if (!seen.insert(name).second)
      fail(ErrorCode::schema_error, "duplicate feature column: " + name);
  }

  for (size_t r = 1; r < lines.size(); ++r) {
    const auto& cells = lines[r];
    if (cells.size() != header.size())
      fail(ErrorCode::arity_mismatch, "row " + std::to_string(r) + " has " +
                                          std::to_string(cells.size()) + " cells, expected " +
                                          std::to_string(header.size()));
    if (cells[0].empty()) fail(ErrorCode::schema_error, "empty patient_id in row " + std::to_string(r));
    if (cells[1] != "0" && cells[1] != "1")
      fail(ErrorCode::schema_error, "label must be 0 or 1, got '" + cells[1] + "'");
    t.patient_ids.push_back(cells[0]);
    t.labels.push_back(cells[1] == "1" ? 1 : 0);
    std::vector<double> row(t.feature_names.size());
    for (size_t c = 2; c < cells.size(); ++c)
      row[c - 2] = cells[c].empty() ? missing_value() : parse_double(cells[c]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

FeatureTable load_feature_table(const std::string& path) {
  return parse_feature_table(read_file(path));
}

std::string feature_table_csv(const FeatureTable& table) {
  CsvWriter w;
  w.cell(std::string("patient_id"));
  w.cell(std::string("label"));
  for (const auto& name : table.feature_names) w.cell(name);
  w.end_row();
  for (size_t i = 0; i < table.n_rows(); ++i) {
    if (table.rows[i].size() != table.n_features())
      fail(ErrorCode::arity_mismatch, "row width drifted at " + table.patient_ids[i]);
    w.cell(table.patient_ids[i]);
    w.cell(std::string(table.labels[i] ? "1" : "0"));
    for (double v : table.rows[i]) {
      if (is_missing(v))
        w.cell_missing();
      else
        w.cell(v);
    }
    w.end_row();
  }
  return w.text();
}

void save_feature_table(const FeatureTable& table, const std::string& path) {
  write_file_atomic(path, feature_table_csv(table));
}

FeatureTable subset_columns(const FeatureTable& table,
                            const std::vector<std::string>& names) {
  std::vector<size_t> idx;
  idx.reserve(names.size());
  for (const auto& name : names) {
    size_t j = 0;
    for (; j < table.feature_names.size(); ++j)
      if (table.feature_names[j] == name) break;
    if (j == table.feature_names.size())
      fail(ErrorCode::bad_argument, "unknown feature column: " + name);
    idx.push_back(j);
  }
  FeatureTable out;
  out.feature_names = names;
  out.patient_ids = table.patient_ids;
  out.labels = table.labels;
  out.rows.reserve(table.n_rows());
  for (const auto& row : table.rows) {
    std::vector<double> r(idx.size());
    for (size_t k = 0; k < idx.size(); ++k) r[k] = row[idx[k]];
    out.rows.push_back(std::move(r));
  }
  return out;
}

FeatureTable subset_rows(const FeatureTable& table, const std::vector<size_t>& indices) {
  FeatureTable out;
  out.feature_names = table.feature_names;
  for (size_t i : indices) {
    if (i >= table.n_rows()) fail(ErrorCode::bad_argument, "row index out of range");
    out.patient_ids.push_back(table.patient_ids[i]);
    out.labels.push_back(table.labels[i]);
    out.rows.push_back(table.rows[i]);
  }
  return out;
}

}  // namespace ctomics
