#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctomics/feature_table.hpp"

namespace ctomics {

struct GBDTConfig {
  int iterations = 300;
  double learning_rate = 0.01;
  int depth = 6;
  double l2_leaf_reg = 5.0;
  double feature_subsample = 0.75;
  int border_count = 64;
  double row_subsample = 0.6;
  bool auto_class_weights = true;
  bool early_stopping = true;
  uint64_t seed = 0;
  int threads = 10;
};

void validate_config(const GBDTConfig& cfg);

// Quantile bins per feature. Values are binned by counting boundaries <= v,
// so bin b <= t exactly when v < boundaries[t]. NaN maps to the extra
// missing bin past the value bins.
struct BinMapper {
  std::vector<std::vector<double>> boundaries;

  int value_bins(int feature) const {
    return static_cast<int>(boundaries[feature].size()) + 1;
  }
  int missing_bin(int feature) const { return value_bins(feature); }
  int bin_of(int feature, double v) const;
};

BinMapper bin_features(const FeatureTable& table, int border_count);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  bool missing_left = false;
  int left = -1;
  int right = -1;
  double value = 0.0;  // raw Newton value; learning rate applied at predict
  double cover = 0.0;  // subsampled training rows that reached the node
  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root, children after parents
  int max_depth() const;
};

struct Model {
  double base_margin = 0.0;
  std::vector<Tree> trees;
  std::vector<std::string> feature_names;
  GBDTConfig config;
  int best_iteration = 0;
  // validation logloss after 0..n trees; empty when fit had no valid set
  std::vector<double> valid_logloss;
};

Model fit(const FeatureTable& train, const FeatureTable* valid, const GBDTConfig& cfg);

double predict_margin(const Model& model, const std::vector<double>& row);
double predict_proba(const Model& model, const std::vector<double>& row);
std::vector<double> predict_margin_rows(const Model& model, const FeatureTable& table);

std::string serialize(const Model& model);
Model deserialize(const std::string& document);

double sigmoid(double margin);
// mean binary logloss of margins against labels, fixed accumulation order
double mean_logloss(const std::vector<double>& margins, const std::vector<int>& labels);

}  // namespace ctomics
