#pragma once

#include <string>
#include <vector>

namespace ctomics {

// Rows keyed by patient_id with a binary label and numeric features.
// Missing values are NaN in memory and empty cells on disk.
struct FeatureTable {
  std::vector<std::string> feature_names;
  std::vector<std::string> patient_ids;
  std::vector<int> labels;
  std::vector<std::vector<double>> rows;

  size_t n_rows() const { return rows.size(); }
  size_t n_features() const { return feature_names.size(); }
};

double missing_value();
bool is_missing(double v);

// CSV with header patient_id,label,<features...>.
FeatureTable parse_feature_table(const std::string& text);
FeatureTable load_feature_table(const std::string& path);
std::string feature_table_csv(const FeatureTable& table);
void save_feature_table(const FeatureTable& table, const std::string& path);

FeatureTable subset_columns(const FeatureTable& table,
                            const std::vector<std::string>& names);
FeatureTable subset_rows(const FeatureTable& table,
                         const std::vector<size_t>& indices);

}  // namespace ctomics
