#include "ctomics/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "ctomics/csv.hpp"
#include "ctomics/error.hpp"
#include "ctomics/eval.hpp"
#include "ctomics/rng.hpp"

namespace ctomics {

namespace {

// weighted path state of the recursion; pweight carries the permutation
// weight of each subset size along the unique feature path
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

void extend_path(std::vector<PathElement>& path, double zero_fraction,
                 double one_fraction, int feature) {
  const int d = static_cast<int>(path.size());
  path.push_back({feature, zero_fraction, one_fraction, d == 0 ? 1.0 : 0.0});
  for (int i = d - 1; i >= 0; --i) {
    path[i + 1].pweight +=
        one_fraction * path[i].pweight * (i + 1) / static_cast<double>(d + 1);
    path[i].pweight =
        zero_fraction * path[i].pweight * (d - i) / static_cast<double>(d + 1);
  }
}

// total weight the path would carry with element `index` removed
double unwound_path_sum(const std::vector<PathElement>& path, size_t index) {
  const int d = static_cast<int>(path.size()) - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double total = 0.0;
  if (one != 0.0) {
    double next_one = path[d].pweight;
    for (int i = d - 1; i >= 0; --i) {
      const double tmp = next_one * (d + 1) / ((i + 1) * one);
      total += tmp;
      next_one = path[i].pweight - tmp * zero * (d - i) / static_cast<double>(d + 1);
    }
  } else {
    for (int i = d - 1; i >= 0; --i)
      total += path[i].pweight * (d + 1) / (zero * (d - i));
  }
  return total;
}

void unwind_path(std::vector<PathElement>& path, size_t index) {
  const int d = static_cast<int>(path.size()) - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next_one = path[d].pweight;
  for (int i = d - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one * (d + 1) / ((i + 1) * one);
      next_one = tmp - path[i].pweight * zero * (d - i) / static_cast<double>(d + 1);
    } else {
      path[i].pweight = path[i].pweight * (d + 1) / (zero * (d - i));
    }
  }
  for (size_t i = index; i + 1 < path.size(); ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
  path.pop_back();
}

// path passed by value: each branch keeps its own copy
void shap_recurse(const Tree& tree, const std::vector<double>& row, double scale,
                  int node_index, std::vector<PathElement> path, double zero_fraction,
                  double one_fraction, int parent_feature, std::vector<double>& phi) {
  extend_path(path, zero_fraction, one_fraction, parent_feature);
  const TreeNode& node = tree.nodes[node_index];
  if (node.is_leaf()) {
    // path[0] is the synthetic root element
    for (size_t i = 1; i < path.size(); ++i) {
      const double w = unwound_path_sum(path, i);
      phi[path[i].feature] +=
          w * (path[i].one_fraction - path[i].zero_fraction) * scale * node.value;
    }
    return;
  }
  const double v = row[node.feature];
  const bool go_left = std::isnan(v) ? node.missing_left : v < node.threshold;
  const int hot = go_left ? node.left : node.right;
  const int cold = go_left ? node.right : node.left;
  const double hot_fraction = tree.nodes[hot].cover / node.cover;
  const double cold_fraction = tree.nodes[cold].cover / node.cover;
  double incoming_zero = 1.0, incoming_one = 1.0;
  size_t k = 0;
  while (k < path.size() && path[k].feature != node.feature) ++k;
  if (k < path.size()) {
    incoming_zero = path[k].zero_fraction;
    incoming_one = path[k].one_fraction;
    unwind_path(path, k);
  }
  shap_recurse(tree, row, scale, hot, path, hot_fraction * incoming_zero, incoming_one,
               node.feature, phi);
  shap_recurse(tree, row, scale, cold, path, cold_fraction * incoming_zero, 0.0,
               node.feature, phi);
}

double tree_mean_value(const Tree& tree) {
  double acc = 0.0;
  for (const TreeNode& n : tree.nodes)
    if (n.is_leaf()) acc += n.cover * n.value;
  return acc / tree.nodes[0].cover;
}

void check_arity(const Model& model, size_t arity) {
  if (arity != model.feature_names.size())
    fail(ErrorCode::arity_mismatch, "row has " + std::to_string(arity) +
                                        " features, model expects " +
                                        std::to_string(model.feature_names.size()));
}

}  // namespace

ShapVector tree_shap_one(const Model& model, size_t tree_index,
                         const std::vector<double>& row) {
  check_arity(model, row.size());
  if (tree_index >= model.trees.size())
    fail(ErrorCode::bad_argument, "tree index out of range");
  const Tree& tree = model.trees[tree_index];
  ShapVector out;
  out.values.assign(row.size(), 0.0);
  if (tree.nodes.empty() || tree.nodes[0].cover <= 0.0) return out;
  const double scale = model.config.learning_rate;
  shap_recurse(tree, row, scale, 0, {}, 1.0, 1.0, -1, out.values);
  out.base_value = scale * tree_mean_value(tree);
  return out;
}

ShapVector tree_shap(const Model& model, const std::vector<double>& row) {
  check_arity(model, row.size());
  ShapVector out;
  out.values.assign(row.size(), 0.0);
  out.base_value = model.base_margin;
  for (size_t t = 0; t < model.trees.size(); ++t) {
    ShapVector one = tree_shap_one(model, t, row);
    for (size_t j = 0; j < out.values.size(); ++j) out.values[j] += one.values[j];
    out.base_value += one.base_value;
  }
  return out;
}

std::vector<ShapVector> tree_shap_batch(const Model& model, const FeatureTable& table,
                                        int threads) {
  check_arity(model, table.n_features());
  if (threads < 1) fail(ErrorCode::bad_config, "threads must be >= 1");
  std::vector<ShapVector> out(table.n_rows());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(table.n_rows());
#pragma omp parallel for num_threads(threads) schedule(static) if (threads > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = tree_shap(model, table.rows[i]);
  return out;
}

ShapVector brute_force_shap(const Model& model, size_t tree_index,
                            const std::vector<double>& row) {
  check_arity(model, row.size());
  if (tree_index >= model.trees.size())
    fail(ErrorCode::bad_argument, "tree index out of range");
  const Tree& tree = model.trees[tree_index];
  ShapVector out;
  out.values.assign(row.size(), 0.0);
  if (tree.nodes.empty() || tree.nodes[0].cover <= 0.0) return out;

  std::vector<int> used;
  for (const TreeNode& n : tree.nodes)
    if (!n.is_leaf() && std::find(used.begin(), used.end(), n.feature) == used.end())
      used.push_back(n.feature);
  std::sort(used.begin(), used.end());
  const size_t u = used.size();
  if (u > 10)
    fail(ErrorCode::bad_argument,
         "subset enumeration supports at most 10 distinct features, tree uses " +
             std::to_string(u));

  std::vector<int> bit_of(row.size(), -1);
  for (size_t b = 0; b < u; ++b) bit_of[used[b]] = static_cast<int>(b);

  // v(S): follow the row on features in S, cover-weighted average otherwise.
  // Children always carry higher indices, so a reverse sweep is bottom-up.
  const uint32_t n_masks = 1u << u;
  std::vector<double> v(n_masks);
  std::vector<double> node_val(tree.nodes.size());
  for (uint32_t mask = 0; mask < n_masks; ++mask) {
    for (int idx = static_cast<int>(tree.nodes.size()) - 1; idx >= 0; --idx) {
      const TreeNode& node = tree.nodes[idx];
      if (node.is_leaf()) {
        node_val[idx] = node.value;
        continue;
      }
      if (mask >> bit_of[node.feature] & 1u) {
        const double x = row[node.feature];
        const bool go_left = std::isnan(x) ? node.missing_left : x < node.threshold;
        node_val[idx] = node_val[go_left ? node.left : node.right];
      } else {
        node_val[idx] = (tree.nodes[node.left].cover * node_val[node.left] +
                         tree.nodes[node.right].cover * node_val[node.right]) /
                        node.cover;
      }
    }
    v[mask] = node_val[0];
  }

  std::vector<double> fact(u + 1, 1.0);
  for (size_t i = 1; i <= u; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  const double scale = model.config.learning_rate;
  for (size_t b = 0; b < u; ++b) {
    double phi = 0.0;
    for (uint32_t mask = 0; mask < n_masks; ++mask) {
      if (mask >> b & 1u) continue;
      const int s = std::popcount(mask);
      const double w = fact[s] * fact[u - 1 - s] / fact[u];
      phi += w * (v[mask | (1u << b)] - v[mask]);
    }
    out.values[used[b]] = scale * phi;
  }
  out.base_value = scale * v[0];
  return out;
}

ImportanceRanking select_features_cv(const FeatureTable& table, const GBDTConfig& config,
                                     int top_k, int k_folds) {
  validate_config(config);
  const size_t M = table.n_features();
  if (top_k < 1 || static_cast<size_t>(top_k) > M)
    fail(ErrorCode::bad_argument, "top_k must be between 1 and the feature count");
  FoldPlan plan = stratified_kfold(table.labels, k_folds, config.seed);
  if (config.early_stopping) {
    int64_t pos = 0;
    for (int y : table.labels) pos += y;
    const int64_t neg = static_cast<int64_t>(table.labels.size()) - pos;
    const int64_t fold_pos = (pos + k_folds - 1) / k_folds;
    const int64_t fold_neg = (neg + k_folds - 1) / k_folds;
    if (pos - fold_pos < 5 || neg - fold_neg < 5)
      fail(ErrorCode::degenerate_folds,
           "training folds too small to carve an early-stopping split");
  }

  const size_t N = table.n_rows();
  std::vector<double> score(M, 0.0);
  std::vector<char> in_valid(N, 0);
  for (int f = 0; f < k_folds; ++f) {
    std::fill(in_valid.begin(), in_valid.end(), 0);
    for (size_t i : plan.folds[f]) in_valid[i] = 1;
    std::vector<size_t> train_rows;
    train_rows.reserve(N - plan.folds[f].size());
    for (size_t i = 0; i < N; ++i)
      if (!in_valid[i]) train_rows.push_back(i);
    FeatureTable train_tbl = subset_rows(table, train_rows);
    Model model =
        train_fold_model(train_tbl, config, derive_seed(config.seed, static_cast<uint64_t>(f)));

    FeatureTable valid_tbl = subset_rows(table, plan.folds[f]);
    std::vector<ShapVector> shap = tree_shap_batch(model, valid_tbl, config.threads);
    for (size_t j = 0; j < M; ++j) {
      double acc = 0.0;
      for (const ShapVector& s : shap) acc += std::fabs(s.values[j]);
      score[j] += acc / static_cast<double>(shap.size());
    }
  }
  for (double& s : score) s /= static_cast<double>(k_folds);

  std::vector<size_t> order(M);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return table.feature_names[a] < table.feature_names[b];
  });

  ImportanceRanking out;
  out.order.reserve(M);
  for (size_t r = 0; r < M; ++r) {
    RankedFeature rf;
    rf.name = table.feature_names[order[r]];
    rf.mean_abs_shap = score[order[r]];
    rf.rank = static_cast<int>(r) + 1;
    rf.selected = r < static_cast<size_t>(top_k);
    if (rf.selected) out.selected.push_back(rf.name);
    out.order.push_back(std::move(rf));
  }
  return out;
}

std::string importance_csv(const ImportanceRanking& ranking) {
  CsvWriter w;
  w.cell(std::string("feature"));
  w.cell(std::string("mean_abs_shap"));
  w.cell(std::string("rank"));
  w.cell(std::string("selected"));
  w.end_row();
  for (const RankedFeature& f : ranking.order) {
    w.cell(f.name);
    w.cell(f.mean_abs_shap);
    w.cell(std::to_string(f.rank));
    w.cell(std::string(f.selected ? "1" : "0"));
    w.end_row();
  }
  return w.text();
}

}  // namespace ctomics
