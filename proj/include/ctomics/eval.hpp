#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctomics/feature_table.hpp"
#include "ctomics/gbdt.hpp"

namespace ctomics {

struct FoldPlan {
  int repeat = 0;
  int k = 0;
  uint64_t seed = 0;
  std::vector<std::vector<size_t>> folds;  // row indices, each fold sorted
};

// per-class shuffled round-robin; fold sizes per class differ by at most 1
FoldPlan stratified_kfold(const std::vector<int>& labels, int k, uint64_t seed);

struct ConfusionCounts {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  int64_t total() const { return tp + fp + tn + fn; }
};

// a metric with a zero denominator is flagged rather than NaN
struct MetricValue {
  double value = 0.0;
  bool defined = false;
};

struct ThresholdMetrics {
  double threshold = 0.5;
  ConfusionCounts counts;
  MetricValue sensitivity, specificity, accuracy, f1;
};

ThresholdMetrics confusion_and_metrics(const std::vector<double>& scores,
                                       const std::vector<int>& labels,
                                       double threshold = 0.5);

// Mann-Whitney with ties counted 0.5
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);
// average precision over ranked positives
double auprc(const std::vector<double>& scores, const std::vector<int>& labels);

struct RocPoint {
  double threshold = 0.0, fpr = 0.0, tpr = 0.0;
};
struct PrPoint {
  double threshold = 0.0, recall = 0.0, precision = 0.0;
};

// points at every distinct score threshold (predict positive when score >= threshold)
std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& labels);
std::vector<PrPoint> pr_curve(const std::vector<double>& scores,
                              const std::vector<int>& labels);

std::string roc_curve_csv(const std::vector<RocPoint>& points);
std::string pr_curve_csv(const std::vector<PrPoint>& points);

struct RepeatMetrics {
  double sensitivity = 0.0, specificity = 0.0, accuracy = 0.0;
  double f1 = 0.0, auroc = 0.0, auprc = 0.0;
};

struct MetricsReport {
  int k = 0;
  int repeats = 0;
  double threshold = 0.5;
  std::vector<std::string> columns;
  std::vector<RepeatMetrics> per_repeat;  // pooled out-of-fold metrics per repeat
  RepeatMetrics mean;
  RepeatMetrics sd;  // unbiased sample sd across repeats; 0 when repeats == 1
  // out-of-fold scores of repeat 0, aligned to table row order, for paired tests
  std::vector<double> scores_repeat0;
  std::vector<int> labels_repeat0;
  std::vector<RocPoint> roc_repeat0;
  std::vector<PrPoint> pr_repeat0;
};

// Per repeat: derived fold plan, per-fold training on the other folds only
// (early-stopping split carved from those training rows), out-of-fold scores
// pooled and scored. columns empty = all features.
MetricsReport repeated_cv(const FeatureTable& table, const GBDTConfig& config, int k,
                          int repeats, double threshold,
                          const std::vector<std::string>& columns, int threads = 1);

// Shared fold-training policy. When early stopping is on, a stratified fifth
// of the training rows is held out for it; training seed and carve seed are
// both derived from fold_seed so the fold is reproducible in isolation.
Model train_fold_model(const FeatureTable& train, const GBDTConfig& config,
                       uint64_t fold_seed);

std::string metrics_report_text(const MetricsReport& report);

}  // namespace ctomics
