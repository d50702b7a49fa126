#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ctomics/feature_table.hpp"
#include "ctomics/gbdt.hpp"

namespace ctomics {

// per-row attribution in margin units; base_value + sum(values) = margin
struct ShapVector {
  std::vector<double> values;
  double base_value = 0.0;
};

// exact path-dependent Shapley values under the cover counts frozen at
// training time, summed over all trees
ShapVector tree_shap(const Model& model, const std::vector<double>& row);

// one tree's contribution; base_value is that tree's cover-weighted mean
// margin (learning rate applied), so per-tree vectors sum to the model's
ShapVector tree_shap_one(const Model& model, size_t tree_index,
                         const std::vector<double>& row);

// rows are independent; output identical for any thread count
std::vector<ShapVector> tree_shap_batch(const Model& model, const FeatureTable& table,
                                        int threads = 1);

// subset-enumeration oracle over a single tree, at most 10 distinct features
ShapVector brute_force_shap(const Model& model, size_t tree_index,
                            const std::vector<double>& row);

struct RankedFeature {
  std::string name;
  double mean_abs_shap = 0.0;
  int rank = 0;  // 1-based, descending score, ties broken by name
  bool selected = false;
};

struct ImportanceRanking {
  std::vector<RankedFeature> order;
  std::vector<std::string> selected;  // top_k names in rank order
};

// One model per fold, trained on the other folds only; mean |SHAP| taken on
// each fold's held-out rows and averaged across folds.
ImportanceRanking select_features_cv(const FeatureTable& table, const GBDTConfig& config,
                                     int top_k, int k_folds = 5);

std::string importance_csv(const ImportanceRanking& ranking);

}  // namespace ctomics
