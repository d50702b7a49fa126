#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ctomics/eval.hpp"
#include "ctomics/rng.hpp"
#include "ctomics/shap.hpp"
#include "helpers.hpp"

using namespace ctomics;

namespace {

Model hand_model(std::vector<std::string> names, double base_margin, double lr,
                 std::vector<Tree> trees) {
  Model m;
  m.feature_names = std::move(names);
  m.base_margin = base_margin;
  m.trees = std::move(trees);
  m.config.learning_rate = lr;
  m.config.depth = 12;
  return m;
}

// split on feature 1 at 0.5, missing goes left; covers 4 and 6
Model stump_model(double lr = 0.25, double base = 0.125) {
  Tree t;
  t.nodes.push_back({1, 0.5, true, 1, 2, 0.0, 10.0});
  t.nodes.push_back({-1, 0.0, false, -1, -1, 2.0, 4.0});
  t.nodes.push_back({-1, 0.0, false, -1, -1, -1.0, 6.0});
  return hand_model({"f0", "f1", "f2"}, base, lr, {t});
}

// appended pre-order so children always have higher indices
int build_random(Tree& tree, Rng& rng, int n_features, int depth_left) {
  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({});
  if (depth_left == 0 || rng.next_real() < 0.25) {
    tree.nodes[idx].value = rng.next_normal();
    tree.nodes[idx].cover = 0.5 + 9.5 * rng.next_real();
    return idx;
  }
  const int feat = static_cast<int>(rng.next_below(n_features));
  const double thr = rng.next_real() * 2.0 - 1.0;
  const bool ml = rng.next_u64() & 1;
  const int l = build_random(tree, rng, n_features, depth_left - 1);
  const int r = build_random(tree, rng, n_features, depth_left - 1);
  tree.nodes[idx] = {feat, thr, ml, l, r, 0.0,
                     tree.nodes[l].cover + tree.nodes[r].cover};
  return idx;
}

std::vector<double> random_row(Rng& rng, int n_features, double nan_prob) {
  std::vector<double> row(n_features);
  for (double& v : row)
    v = rng.next_real() < nan_prob ? std::numeric_limits<double>::quiet_NaN()
                                   : rng.next_real() * 2.0 - 1.0;
  return row;
}

FeatureTable signal_table(int n, int n_noise, uint64_t seed) {
  Rng rng(seed);
  FeatureTable t;
  t.feature_names = {"sig0", "sig1", "sig2"};
  for (int j = 0; j < n_noise; ++j) t.feature_names.push_back("noise" + std::to_string(j));
  for (int i = 0; i < n; ++i) {
    std::vector<double> row;
    for (size_t j = 0; j < t.feature_names.size(); ++j) row.push_back(rng.next_normal());
    t.patient_ids.push_back("p" + std::to_string(i));
    t.labels.push_back(row[0] + 0.8 * row[1] - 0.6 * row[2] > 0.0 ? 1 : 0);
    t.rows.push_back(std::move(row));
  }
  return t;
}

double shap_total(const ShapVector& s) {
  double total = s.base_value;
  for (double v : s.values) total += v;
  return total;
}

}  // namespace

TEST_SUITE("shap") {
  TEST_CASE("stump closed form") {
    Model m = stump_model();
    const double mean = (4.0 * 2.0 + 6.0 * -1.0) / 10.0;  // 0.2

    ShapVector left = tree_shap(m, {9.0, 0.2, -3.0});
    CHECK(left.base_value == doctest::Approx(0.125 + 0.25 * mean).epsilon(1e-12));
    CHECK(left.values[0] == 0.0);
    CHECK(left.values[2] == 0.0);
    CHECK(left.values[1] == doctest::Approx(0.25 * (2.0 - mean)).epsilon(1e-12));
    CHECK(shap_total(left) == doctest::Approx(predict_margin(m, {9.0, 0.2, -3.0})).epsilon(1e-12));

    ShapVector right = tree_shap(m, {0.0, 0.9, 0.0});
    CHECK(right.values[1] == doctest::Approx(0.25 * (-1.0 - mean)).epsilon(1e-12));

    // missing routes left here, so the attribution matches the left branch
    const double nan = std::numeric_limits<double>::quiet_NaN();
    ShapVector miss = tree_shap(m, {0.0, nan, 0.0});
    CHECK(miss.values[1] == doctest::Approx(left.values[1]).epsilon(1e-12));
  }

  TEST_CASE("zero trees attribute nothing") {
    Model m = hand_model({"a", "b"}, 0.7, 0.1, {});
    ShapVector s = tree_shap(m, {1.0, 2.0});
    CHECK(s.base_value == 0.7);
    CHECK(s.values[0] == 0.0);
    CHECK(s.values[1] == 0.0);
  }

  TEST_CASE("symmetric features get equal attributions") {
    Tree t;
    t.nodes.push_back({0, 0.5, false, 1, 4, 0.0, 4.0});
    t.nodes.push_back({1, 0.5, false, 2, 3, 0.0, 2.0});
    t.nodes.push_back({-1, 0.0, false, -1, -1, 1.0, 1.0});
    t.nodes.push_back({-1, 0.0, false, -1, -1, 0.0, 1.0});
    t.nodes.push_back({1, 0.5, false, 5, 6, 0.0, 2.0});
    t.nodes.push_back({-1, 0.0, false, -1, -1, 0.0, 1.0});
    t.nodes.push_back({-1, 0.0, false, -1, -1, 1.0, 1.0});
    Model m = hand_model({"x", "y"}, 0.0, 1.0, {t});

    ShapVector low = tree_shap(m, {0.2, 0.2});
    CHECK(low.values[0] == doctest::Approx(low.values[1]).epsilon(1e-12));
    CHECK(low.values[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(low.base_value == doctest::Approx(0.5).epsilon(1e-12));

    ShapVector high = tree_shap(m, {0.8, 0.8});
    CHECK(high.values[0] == doctest::Approx(high.values[1]).epsilon(1e-12));

    ShapVector brute = brute_force_shap(m, 0, {0.2, 0.2});
    CHECK(brute.values[0] == doctest::Approx(low.values[0]).epsilon(1e-12));
    CHECK(brute.values[1] == doctest::Approx(low.values[1]).epsilon(1e-12));
  }

  TEST_CASE("depth-1 tree matches the enumeration oracle") {
    Model m = stump_model();
    for (double x1 : {0.1, 0.9}) {
      ShapVector fast = tree_shap_one(m, 0, {0.0, x1, 0.0});
      ShapVector brute = brute_force_shap(m, 0, {0.0, x1, 0.0});
      for (int j = 0; j < 3; ++j)
        CHECK(fast.values[j] == doctest::Approx(brute.values[j]).epsilon(1e-12));
      CHECK(fast.base_value == doctest::Approx(brute.base_value).epsilon(1e-12));
    }
  }

  TEST_CASE("random trees match the enumeration oracle") {
    Rng rng(404);
    for (int trial = 0; trial < 30; ++trial) {
      Tree t;
      build_random(t, rng, 4, 4);
      Model m = hand_model({"f0", "f1", "f2", "f3"}, 0.3, 0.37, {t});
      for (int r = 0; r < 200; ++r) {
        std::vector<double> row = random_row(rng, 4, 0.15);
        ShapVector fast = tree_shap_one(m, 0, row);
        ShapVector brute = brute_force_shap(m, 0, row);
        for (int j = 0; j < 4; ++j)
          CHECK(std::fabs(fast.values[j] - brute.values[j]) < 1e-9);
        CHECK(std::fabs(fast.base_value - brute.base_value) < 1e-9);
        ShapVector full = tree_shap(m, row);
        CHECK(std::fabs(shap_total(full) - predict_margin(m, row)) < 1e-9);
      }
    }
  }

  TEST_CASE("local accuracy on a trained model") {
    FeatureTable t = signal_table(160, 4, 51);
    // sprinkle missing cells so the missing-direction paths are exercised
    Rng rng(52);
    for (auto& row : t.rows)
      for (double& v : row)
        if (rng.next_real() < 0.08) v = std::numeric_limits<double>::quiet_NaN();
    GBDTConfig cfg;
    cfg.iterations = 40;
    cfg.learning_rate = 0.1;
    cfg.depth = 4;
    cfg.early_stopping = false;
    cfg.threads = 1;
    Model m = fit(t, nullptr, cfg);
    REQUIRE(!m.trees.empty());
    for (const auto& row : t.rows) {
      ShapVector s = tree_shap(m, row);
      CHECK(std::fabs(shap_total(s) - predict_margin(m, row)) < 1e-9);
    }
  }

  TEST_CASE("unused feature gets exactly zero") {
    FeatureTable t = signal_table(120, 2, 61);
    for (auto& row : t.rows) row[4] = 3.14;  // constant column is never splittable
    GBDTConfig cfg;
    cfg.iterations = 20;
    cfg.learning_rate = 0.1;
    cfg.depth = 3;
    cfg.early_stopping = false;
    cfg.threads = 1;
    Model m = fit(t, nullptr, cfg);
    for (const Tree& tree : m.trees)
      for (const TreeNode& n : tree.nodes) CHECK(n.feature != 4);
    for (const auto& row : t.rows) {
      ShapVector s = tree_shap(m, row);
      CHECK(s.values[4] == 0.0);
    }
  }

  TEST_CASE("model attribution is the sum of per-tree attributions") {
    FeatureTable t = signal_table(100, 3, 71);
    GBDTConfig cfg;
    cfg.iterations = 6;
    cfg.learning_rate = 0.2;
    cfg.depth = 3;
    cfg.early_stopping = false;
    cfg.threads = 1;
    Model m = fit(t, nullptr, cfg);
    REQUIRE(m.trees.size() == 6);
    for (int r = 0; r < 10; ++r) {
      const auto& row = t.rows[r * 9];
      ShapVector full = tree_shap(m, row);
      ShapVector acc;
      acc.values.assign(t.n_features(), 0.0);
      acc.base_value = m.base_margin;
      for (size_t k = 0; k < m.trees.size(); ++k) {
        ShapVector one = tree_shap_one(m, k, row);
        for (size_t j = 0; j < acc.values.size(); ++j) acc.values[j] += one.values[j];
        acc.base_value += one.base_value;
      }
      CHECK(acc.base_value == full.base_value);
      for (size_t j = 0; j < acc.values.size(); ++j) CHECK(acc.values[j] == full.values[j]);
    }
  }

  TEST_CASE("batch equals per-row computation for any thread count") {
    FeatureTable t = signal_table(30, 3, 81);
    GBDTConfig cfg;
    cfg.iterations = 10;
    cfg.learning_rate = 0.2;
    cfg.depth = 3;
    cfg.early_stopping = false;
    cfg.threads = 1;
    Model m = fit(t, nullptr, cfg);
    std::vector<ShapVector> batch = tree_shap_batch(m, t, 4);
    REQUIRE(batch.size() == t.n_rows());
    for (size_t i = 0; i < t.n_rows(); ++i) {
      ShapVector one = tree_shap(m, t.rows[i]);
      CHECK(batch[i].base_value == one.base_value);
      for (size_t j = 0; j < t.n_features(); ++j)
        CHECK(batch[i].values[j] == one.values[j]);
    }
  }

  TEST_CASE("error paths") {
    Model m = stump_model();
    expect_error(ErrorCode::arity_mismatch, [&] { tree_shap(m, {1.0, 2.0}); });
    expect_error(ErrorCode::bad_argument, [&] { brute_force_shap(m, 3, {1.0, 2.0, 3.0}); });

    // left-spine chain over 11 distinct features defeats subset enumeration
    Tree chain;
    chain.nodes.resize(23);
    for (int i = 0; i < 11; ++i) {
      chain.nodes[2 * i] = {i, 0.0, false, 2 * i + 1, 2 * i + 2, 0.0, 0.0};
      chain.nodes[2 * i + 1] = {-1, 0.0, false, -1, -1, double(i), 1.0};
    }
    chain.nodes[22] = {-1, 0.0, false, -1, -1, 11.0, 1.0};
    for (int i = 10; i >= 0; --i)
      chain.nodes[2 * i].cover =
          chain.nodes[2 * i + 1].cover + chain.nodes[2 * i + 2].cover;
    std::vector<std::string> names;
    for (int i = 0; i < 11; ++i) names.push_back("f" + std::to_string(i));
    Model wide = hand_model(names, 0.0, 1.0, {chain});
    std::vector<double> row(11, -1.0);
    expect_error(ErrorCode::bad_argument, [&] { brute_force_shap(wide, 0, row); });
    // the path algorithm itself has no such limit
    ShapVector s = tree_shap(wide, row);
    CHECK(std::fabs(shap_total(s) - predict_margin(wide, row)) < 1e-9);
  }

  TEST_CASE("feature selection finds the planted signal") {
    FeatureTable t = signal_table(400, 6, 23);
    GBDTConfig cfg;
    cfg.iterations = 60;
    cfg.learning_rate = 0.1;
    cfg.depth = 3;
    cfg.early_stopping = false;
    cfg.threads = 1;
    cfg.seed = 9;
    ImportanceRanking r = select_features_cv(t, cfg, 3, 5);
    REQUIRE(r.order.size() == t.n_features());
    REQUIRE(r.selected.size() == 3);
    std::set<std::string> top(r.selected.begin(), r.selected.end());
    CHECK(top == std::set<std::string>{"sig0", "sig1", "sig2"});

    // every noise feature scores below every planted feature
    CHECK(r.order[2].mean_abs_shap > r.order[3].mean_abs_shap);
    for (size_t i = 0; i < r.order.size(); ++i) {
      CHECK(r.order[i].rank == static_cast<int>(i) + 1);
      CHECK(r.order[i].mean_abs_shap >= 0.0);
      if (i > 0) CHECK(r.order[i - 1].mean_abs_shap >= r.order[i].mean_abs_shap);
      CHECK(r.order[i].selected == (i < 3));
    }

    std::string csv = importance_csv(r);
    CHECK(csv.substr(0, 36) == "feature,mean_abs_shap,rank,selected\n");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);

    // a pure function of table, config and fold assignment
    ImportanceRanking again = select_features_cv(t, cfg, 3, 5);
    CHECK(importance_csv(again) == csv);
    GBDTConfig threaded = cfg;
    threaded.threads = 4;
    ImportanceRanking par = select_features_cv(t, threaded, 3, 5);
    CHECK(importance_csv(par) == csv);
  }

  TEST_CASE("feature selection returns top_k names on a wide table") {
    Rng rng(99);
    FeatureTable t;
    for (int j = 0; j < 424; ++j) t.feature_names.push_back("c" + std::to_string(j));
    for (int i = 0; i < 60; ++i) {
      std::vector<double> row;
      for (int j = 0; j < 424; ++j) row.push_back(rng.next_normal());
      t.patient_ids.push_back("p" + std::to_string(i));
      t.labels.push_back(row[0] > 0.0 ? 1 : 0);
      t.rows.push_back(std::move(row));
    }
    GBDTConfig cfg;
    cfg.iterations = 4;
    cfg.learning_rate = 0.3;
    cfg.depth = 2;
    cfg.early_stopping = false;
    cfg.threads = 1;
    ImportanceRanking r = select_features_cv(t, cfg, 14, 5);
    CHECK(r.selected.size() == 14);
    CHECK(r.order.size() == 424);
  }

  TEST_CASE("feature selection error paths") {
    FeatureTable t = signal_table(8, 2, 13);
    GBDTConfig cfg;
    cfg.iterations = 2;
    cfg.early_stopping = false;
    cfg.threads = 1;
    expect_error(ErrorCode::degenerate_folds, [&] { select_features_cv(t, cfg, 2, 5); });

    FeatureTable ok = signal_table(80, 2, 13);
    expect_error(ErrorCode::bad_argument, [&] { select_features_cv(ok, cfg, 0, 5); });
    expect_error(ErrorCode::bad_argument, [&] {
      select_features_cv(ok, cfg, static_cast<int>(ok.n_features()) + 1, 5);
    });

    // early stopping needs enough of each class left after the carve
    FeatureTable lop = signal_table(40, 2, 17);
    for (size_t i = 0; i < lop.labels.size(); ++i) lop.labels[i] = i < 6 ? 1 : 0;
    GBDTConfig es = cfg;
    es.early_stopping = true;
    expect_error(ErrorCode::degenerate_folds, [&] { select_features_cv(lop, es, 2, 5); });
  }
}
