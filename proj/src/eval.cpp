#include "ctomics/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctomics/csv.hpp"
#include "ctomics/error.hpp"
#include "ctomics/fio.hpp"
#include "ctomics/rng.hpp"

namespace ctomics {

FoldPlan stratified_kfold(const std::vector<int>& labels, int k, uint64_t seed) {
  if (k < 2) fail(ErrorCode::bad_config, "k must be >= 2");
  if (labels.empty()) fail(ErrorCode::empty_input, "no labels to fold");
  std::vector<size_t> by_class[2];
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      fail(ErrorCode::bad_argument, "labels must be 0 or 1");
    by_class[labels[i]].push_back(i);
  }
  for (int c = 0; c < 2; ++c)
    if (by_class[c].size() < static_cast<size_t>(k))
      fail(ErrorCode::degenerate_folds, "class " + std::to_string(c) + " has " +
                                            std::to_string(by_class[c].size()) +
                                            " rows, fewer than k=" + std::to_string(k));
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(k);
  Rng rng(seed);
  for (int c = 0; c < 2; ++c) {
    rng.shuffle(by_class[c]);
    for (size_t i = 0; i < by_class[c].size(); ++i)
      plan.folds[i % k].push_back(by_class[c][i]);
  }
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  return plan;
}

ThresholdMetrics confusion_and_metrics(const std::vector<double>& scores,
                                       const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size())
    fail(ErrorCode::arity_mismatch, "scores and labels differ in length");
  if (scores.empty()) fail(ErrorCode::empty_input, "no rows to score");
  ThresholdMetrics m;
  m.threshold = threshold;
  for (size_t i = 0; i < scores.size(); ++i) {
    bool pred = scores[i] >= threshold;
    if (labels[i])
      (pred ? m.counts.tp : m.counts.fn) += 1;
    else
      (pred ? m.counts.fp : m.counts.tn) += 1;
  }
  auto ratio = [](int64_t num, int64_t den) {
    MetricValue v;
    if (den > 0) {
      v.value = static_cast<double>(num) / static_cast<double>(den);
      v.defined = true;
    }
    return v;
  };
  m.sensitivity = ratio(m.counts.tp, m.counts.tp + m.counts.fn);
  m.specificity = ratio(m.counts.tn, m.counts.tn + m.counts.fp);
  m.accuracy = ratio(m.counts.tp + m.counts.tn, m.counts.total());
  m.f1 = ratio(2 * m.counts.tp, 2 * m.counts.tp + m.counts.fp + m.counts.fn);
  return m;
}

namespace {

// indices sorted by score descending; ties kept adjacent
std::vector<size_t> order_desc(const std::vector<double>& scores) {
  std::vector<size_t> idx(scores.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return idx;
}

std::pair<int64_t, int64_t> class_counts(const std::vector<int>& labels) {
  int64_t pos = 0;
  for (int y : labels) pos += y;
  return {pos, static_cast<int64_t>(labels.size()) - pos};
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    fail(ErrorCode::arity_mismatch, "scores and labels differ in length");
  auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) fail(ErrorCode::single_class, "auroc needs both classes");
  // midrank formulation of the Mann-Whitney statistic
  std::vector<size_t> idx(scores.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a < b;
  });
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (size_t t = i; t <= j; ++t)
      if (labels[idx[t]]) pos_rank_sum += midrank;
    i = j + 1;
  }
  double m = static_cast<double>(pos);
  return (pos_rank_sum - m * (m + 1.0) / 2.0) / (m * static_cast<double>(neg));
}

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    fail(ErrorCode::arity_mismatch, "scores and labels differ in length");
  auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) fail(ErrorCode::single_class, "roc curve needs both classes");
  auto idx = order_desc(scores);
  std::vector<RocPoint> pts;
  pts.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    for (size_t t = i; t <= j; ++t) (labels[idx[t]] ? tp : fp) += 1;
    pts.push_back({scores[idx[i]], static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos)});
    i = j + 1;
  }
  return pts;
}

double auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    fail(ErrorCode::arity_mismatch, "scores and labels differ in length");
  if (scores.empty()) fail(ErrorCode::empty_input, "no rows to score");
  auto [pos, neg] = class_counts(labels);
  (void)neg;
  if (pos == 0) fail(ErrorCode::single_class, "auprc needs at least one positive");
  auto idx = order_desc(scores);
  double ap = 0.0;
  int64_t tp = 0, fp = 0, prev_tp = 0;
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    for (size_t t = i; t <= j; ++t) (labels[idx[t]] ? tp : fp) += 1;
    if (tp > prev_tp) {
      double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
      double recall_inc = static_cast<double>(tp - prev_tp) / static_cast<double>(pos);
      ap += precision * recall_inc;
    }
    prev_tp = tp;
    i = j + 1;
  }
  return ap;
}

std::vector<PrPoint> pr_curve(const std::vector<double>& scores,
                              const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    fail(ErrorCode::arity_mismatch, "scores and labels differ in length");
  auto [pos, neg] = class_counts(labels);
  (void)neg;
  if (pos == 0) fail(ErrorCode::single_class, "pr curve needs at least one positive");
  auto idx = order_desc(scores);
  std::vector<PrPoint> pts;
  int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    for (size_t t = i; t <= j; ++t) (labels[idx[t]] ? tp : fp) += 1;
    pts.push_back({scores[idx[i]], static_cast<double>(tp) / static_cast<double>(pos),
                   static_cast<double>(tp) / static_cast<double>(tp + fp)});
    i = j + 1;
  }
  return pts;
}

std::string roc_curve_csv(const std::vector<RocPoint>& points) {
  CsvWriter w;
  w.cell(std::string("threshold"));
  w.cell(std::string("fpr"));
  w.cell(std::string("tpr"));
  w.end_row();
  for (const auto& p : points) {
    w.cell(p.threshold);
    w.cell(p.fpr);
    w.cell(p.tpr);
    w.end_row();
  }
  return w.text();
}

std::string pr_curve_csv(const std::vector<PrPoint>& points) {
  CsvWriter w;
  w.cell(std::string("threshold"));
  w.cell(std::string("recall"));
  w.cell(std::string("precision"));
  w.end_row();
  for (const auto& p : points) {
    w.cell(p.threshold);
    w.cell(p.recall);
    w.cell(p.precision);
    w.end_row();
  }
  return w.text();
}

namespace {

struct CapturedError {
  bool set = false;
  ErrorCode code = ErrorCode::bad_argument;
  std::string message;
};

RepeatMetrics pooled_metrics(const std::vector<double>& scores,
                             const std::vector<int>& labels, double threshold) {
  ThresholdMetrics tm = confusion_and_metrics(scores, labels, threshold);
  RepeatMetrics r;
  r.sensitivity = tm.sensitivity.value;
  r.specificity = tm.specificity.value;
  r.accuracy = tm.accuracy.value;
  r.f1 = tm.f1.value;
  r.auroc = auroc(scores, labels);
  r.auprc = auprc(scores, labels);
  return r;
}

}  // namespace

Model train_fold_model(const FeatureTable& train, const GBDTConfig& config,
                       uint64_t fold_seed) {
  GBDTConfig fold_cfg = config;
  fold_cfg.seed = derive_seed(fold_seed, 1);
  if (!config.early_stopping) return fit(train, nullptr, fold_cfg);
  FoldPlan es = stratified_kfold(train.labels, 5, derive_seed(fold_seed, 0));
  std::vector<char> in_es(train.n_rows(), 0);
  for (size_t i : es.folds[0]) in_es[i] = 1;
  std::vector<size_t> inner;
  inner.reserve(train.n_rows() - es.folds[0].size());
  for (size_t i = 0; i < train.n_rows(); ++i)
    if (!in_es[i]) inner.push_back(i);
  FeatureTable es_tbl = subset_rows(train, es.folds[0]);
  FeatureTable inner_tbl = subset_rows(train, inner);
  return fit(inner_tbl, &es_tbl, fold_cfg);
}

MetricsReport repeated_cv(const FeatureTable& table, const GBDTConfig& config, int k,
                          int repeats, double threshold,
                          const std::vector<std::string>& columns, int threads) {
  validate_config(config);
  if (repeats < 1) fail(ErrorCode::bad_config, "repeats must be >= 1");
  if (!std::isfinite(threshold)) fail(ErrorCode::bad_config, "threshold must be finite");
  if (threads < 1) fail(ErrorCode::bad_config, "threads must be >= 1");
  const FeatureTable work = columns.empty() ? table : subset_columns(table, columns);
  const std::vector<int>& labels = work.labels;
  const size_t N = work.n_rows();
  if (N == 0) fail(ErrorCode::empty_input, "no rows to cross-validate");

  // every throwing precondition is checked here so the parallel loop stays clean
  stratified_kfold(labels, k, 0);
  if (config.early_stopping) {
    auto [pos, neg] = class_counts(labels);
    int64_t fold_pos = (pos + k - 1) / k, fold_neg = (neg + k - 1) / k;
    if (pos - fold_pos < 5 || neg - fold_neg < 5)
      fail(ErrorCode::degenerate_folds,
           "training folds too small to carve an early-stopping split");
  }

  MetricsReport report;
  report.k = k;
  report.repeats = repeats;
  report.threshold = threshold;
  report.columns = work.feature_names;
  report.per_repeat.resize(repeats);

  std::vector<std::vector<double>> repeat_scores(repeats);
  CapturedError first_error;

#pragma omp parallel for num_threads(threads) schedule(static) if (threads > 1)
  for (int r = 0; r < repeats; ++r) {
    try {
      const uint64_t repeat_seed = derive_seed(config.seed, static_cast<uint64_t>(r));
      FoldPlan plan = stratified_kfold(labels, k, repeat_seed);
      std::vector<double> scores(N, 0.0);
      std::vector<char> in_valid(N, 0);
      for (int f = 0; f < k; ++f) {
        std::fill(in_valid.begin(), in_valid.end(), 0);
        for (size_t i : plan.folds[f]) in_valid[i] = 1;
        std::vector<size_t> train_rows;
        train_rows.reserve(N - plan.folds[f].size());
        for (size_t i = 0; i < N; ++i)
          if (!in_valid[i]) train_rows.push_back(i);
        FeatureTable train_tbl = subset_rows(work, train_rows);

        const uint64_t fold_seed = derive_seed(repeat_seed, static_cast<uint64_t>(f));
        Model model = train_fold_model(train_tbl, config, fold_seed);
        for (size_t i : plan.folds[f]) scores[i] = predict_proba(model, work.rows[i]);
      }
      report.per_repeat[r] = pooled_metrics(scores, labels, threshold);
      if (r == 0) repeat_scores[0] = std::move(scores);
    } catch (const Error& e) {
#pragma omp critical
      if (!first_error.set) {
        first_error.set = true;
        first_error.code = e.code();
        first_error.message = e.what();
      }
    } catch (const std::exception& e) {
#pragma omp critical
      if (!first_error.set) {
        first_error.set = true;
        first_error.code = ErrorCode::bad_argument;
        first_error.message = e.what();
      }
    }
  }
  if (first_error.set) fail(first_error.code, first_error.message);

  auto aggregate = [&](auto member) {
    double mean = 0.0;
    for (const auto& r : report.per_repeat) mean += r.*member;
    mean /= static_cast<double>(repeats);
    double sd = 0.0;
    if (repeats > 1) {
      double ss = 0.0;
      for (const auto& r : report.per_repeat) {
        double d = r.*member - mean;
        ss += d * d;
      }
      sd = std::sqrt(ss / static_cast<double>(repeats - 1));
    }
    return std::make_pair(mean, sd);
  };
  std::tie(report.mean.sensitivity, report.sd.sensitivity) =
      aggregate(&RepeatMetrics::sensitivity);
  std::tie(report.mean.specificity, report.sd.specificity) =
      aggregate(&RepeatMetrics::specificity);
  std::tie(report.mean.accuracy, report.sd.accuracy) = aggregate(&RepeatMetrics::accuracy);
  std::tie(report.mean.f1, report.sd.f1) = aggregate(&RepeatMetrics::f1);
  std::tie(report.mean.auroc, report.sd.auroc) = aggregate(&RepeatMetrics::auroc);
  std::tie(report.mean.auprc, report.sd.auprc) = aggregate(&RepeatMetrics::auprc);

  report.scores_repeat0 = std::move(repeat_scores[0]);
  report.labels_repeat0 = labels;
  report.roc_repeat0 = roc_curve(report.scores_repeat0, labels);
  report.pr_repeat0 = pr_curve(report.scores_repeat0, labels);
  return report;
}

std::string metrics_report_text(const MetricsReport& report) {
  std::string out;
  out += "# repeated stratified cross-validation\n";
  out += "k\t" + std::to_string(report.k) + "\n";
  out += "repeats\t" + std::to_string(report.repeats) + "\n";
  out += "threshold\t" + format_double(report.threshold) + "\n";
  out += "features\t" + std::to_string(report.columns.size()) + "\n";
  out += "metric\tmean\tsd\n";
  auto line = [&](const char* name, double mean, double sd) {
    out += std::string(name) + "\t" + format_double(mean) + "\t" + format_double(sd) + "\n";
  };
  line("sensitivity", report.mean.sensitivity, report.sd.sensitivity);
  line("specificity", report.mean.specificity, report.sd.specificity);
  line("accuracy", report.mean.accuracy, report.sd.accuracy);
  line("f1", report.mean.f1, report.sd.f1);
  line("auroc", report.mean.auroc, report.sd.auroc);
  line("auprc", report.mean.auprc, report.sd.auprc);
  out += "repeat\tsensitivity\tspecificity\taccuracy\tf1\tauroc\tauprc\n";
  for (size_t r = 0; r < report.per_repeat.size(); ++r) {
    const RepeatMetrics& m = report.per_repeat[r];
    out += std::to_string(r) + "\t" + format_double(m.sensitivity) + "\t" +
           format_double(m.specificity) + "\t" + format_double(m.accuracy) + "\t" +
           format_double(m.f1) + "\t" + format_double(m.auroc) + "\t" +
           format_double(m.auprc) + "\n";
  }
  return out;
}

}  // namespace ctomics
