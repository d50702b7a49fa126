#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctomics/feature_table.hpp"
#include "ctomics/gbdt.hpp"
#include "ctomics/rng.hpp"
#include "helpers.hpp"

using namespace ctomics;

namespace {

FeatureTable make_table(std::vector<std::vector<double>> rows, std::vector<int> labels) {
  FeatureTable t;
  size_t nf = rows.empty() ? 0 : rows[0].size();
  for (size_t j = 0; j < nf; ++j) t.feature_names.push_back("f" + std::to_string(j));
  for (size_t i = 0; i < rows.size(); ++i) t.patient_ids.push_back("p" + std::to_string(i));
  t.labels = std::move(labels);
  t.rows = std::move(rows);
  return t;
}

// pair-counting AUC, independent of the eval module
double rank_auc(const std::vector<double>& score, const std::vector<int>& y) {
  double conc = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (!y[i]) continue;
    for (size_t j = 0; j < y.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      if (score[i] > score[j])
        conc += 1.0;
      else if (score[i] == score[j])
        conc += 0.5;
    }
  }
  return conc / static_cast<double>(pairs);
}

// separable by a threshold on feature 0, plus noise features
FeatureTable separable_table(int n, int extra_features, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) {
    std::vector<double> r{i / 10.0};
    for (int j = 0; j < extra_features; ++j) r.push_back(rng.next_normal());
    labels.push_back(r[0] > n / 20.0 ? 1 : 0);
    rows.push_back(std::move(r));
  }
  return make_table(std::move(rows), std::move(labels));
}

FeatureTable noisy_table(int n, int nf, uint64_t seed, double flip = 0.0) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) {
    std::vector<double> r;
    for (int j = 0; j < nf; ++j) r.push_back(rng.next_normal());
    int y = (r[0] + 0.5 * r[1] > 0.0) ? 1 : 0;
    if (flip > 0.0 && rng.next_real() < flip) y = 1 - y;
    labels.push_back(y);
    rows.push_back(std::move(r));
  }
  return make_table(std::move(rows), std::move(labels));
}

GBDTConfig quick_config() {
  GBDTConfig cfg;
  cfg.iterations = 30;
  cfg.learning_rate = 0.1;
  cfg.depth = 3;
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST_SUITE("gbdt") {
  TEST_CASE("config validation") {
    GBDTConfig cfg;
    validate_config(cfg);  // defaults pass
    cfg.iterations = 0;
    validate_config(cfg);  // base margin only is legal
    auto bad = [](auto mutate) {
      GBDTConfig c;
      mutate(c);
      expect_error(ErrorCode::bad_config, [&] { validate_config(c); });
    };
    bad([](GBDTConfig& c) { c.iterations = -1; });
    bad([](GBDTConfig& c) { c.learning_rate = 0.0; });
    bad([](GBDTConfig& c) { c.depth = 0; });
    bad([](GBDTConfig& c) { c.l2_leaf_reg = -1.0; });
    bad([](GBDTConfig& c) { c.feature_subsample = 0.0; });
    bad([](GBDTConfig& c) { c.feature_subsample = 1.5; });
    bad([](GBDTConfig& c) { c.border_count = 0; });
    bad([](GBDTConfig& c) { c.row_subsample = -0.2; });
    bad([](GBDTConfig& c) { c.threads = 0; });
  }

  TEST_CASE("bin mapper: constant feature has no boundaries") {
    FeatureTable t = make_table({{5.0}, {5.0}, {5.0}}, {0, 1, 0});
    BinMapper m = bin_features(t, 64);
    CHECK(m.boundaries[0].empty());
    CHECK(m.value_bins(0) == 1);
    CHECK(m.bin_of(0, 5.0) == 0);
    CHECK(m.bin_of(0, missing_value()) == 1);
  }

  TEST_CASE("bin mapper: three distinct values give midpoint boundaries") {
    FeatureTable t = make_table({{1.0}, {2.0}, {3.0}, {2.0}}, {0, 1, 0, 1});
    BinMapper m = bin_features(t, 64);
    REQUIRE(m.boundaries[0].size() == 2);
    CHECK(m.boundaries[0][0] == 1.5);
    CHECK(m.boundaries[0][1] == 2.5);
    // values at a boundary go right: routing is v < threshold
    CHECK(m.bin_of(0, 1.0) == 0);
    CHECK(m.bin_of(0, 1.5) == 1);
    CHECK(m.bin_of(0, 2.49) == 1);
    CHECK(m.bin_of(0, 2.5) == 2);
    CHECK(m.bin_of(0, 99.0) == 2);
    CHECK(m.bin_of(0, missing_value()) == 3);
    CHECK(m.missing_bin(0) == 3);
  }

  TEST_CASE("bin mapper: 10000 distinct values cap at 63 boundaries") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 10000; ++i) {
      rows.push_back({i * 0.001});
      labels.push_back(i % 2);
    }
    FeatureTable t = make_table(std::move(rows), std::move(labels));
    BinMapper m = bin_features(t, 64);
    CHECK(m.boundaries[0].size() == 63);
    for (size_t k = 1; k < m.boundaries[0].size(); ++k)
      CHECK(m.boundaries[0][k - 1] < m.boundaries[0][k]);
  }

  TEST_CASE("bin mapper: all-missing feature yields only the missing bin") {
    FeatureTable t = make_table({{missing_value()}, {missing_value()}}, {0, 1});
    BinMapper m = bin_features(t, 64);
    CHECK(m.boundaries[0].empty());
    CHECK(m.bin_of(0, missing_value()) == 1);
    expect_error(ErrorCode::empty_input, [] {
      FeatureTable e;
      bin_features(e, 64);
    });
  }

  TEST_CASE("zero iterations predicts the weighted base rate") {
    FeatureTable t = noisy_table(40, 3, 11);
    GBDTConfig cfg = quick_config();
    cfg.iterations = 0;

    Model m = fit(t, nullptr, cfg);
    CHECK(m.trees.empty());
    CHECK(m.base_margin == 0.0);  // auto weighting balances the classes
    CHECK(predict_proba(m, t.rows[0]) == 0.5);

    cfg.auto_class_weights = false;
    Model m2 = fit(t, nullptr, cfg);
    int64_t npos = 0;
    for (int y : t.labels) npos += y;
    double prevalence = double(npos) / double(t.n_rows());
    CHECK(predict_proba(m2, t.rows[0]) == doctest::Approx(prevalence).epsilon(1e-12));
  }

  TEST_CASE("separable labels reach training AUROC 1.0 within 50 iterations") {
    FeatureTable t = separable_table(80, 3, 21);
    GBDTConfig cfg;
    cfg.iterations = 50;
    cfg.learning_rate = 0.1;
    cfg.depth = 3;
    cfg.feature_subsample = 1.0;
    cfg.row_subsample = 1.0;
    cfg.threads = 1;
    Model m = fit(t, nullptr, cfg);
    CHECK(rank_auc(predict_margin_rows(m, t), t.labels) == 1.0);
  }

  TEST_CASE("training logloss nonincreasing without subsampling") {
    FeatureTable t = noisy_table(100, 4, 31, 0.15);
    GBDTConfig cfg;
    cfg.iterations = 40;
    cfg.learning_rate = 0.1;
    cfg.depth = 3;
    cfg.feature_subsample = 1.0;
    cfg.row_subsample = 1.0;
    cfg.auto_class_weights = false;  // plain logloss is then the trained objective
    cfg.threads = 1;
    Model full = fit(t, nullptr, cfg);

    Model trunc = full;
    trunc.trees.clear();
    double prev = mean_logloss(predict_margin_rows(trunc, t), t.labels);
    for (const Tree& tree : full.trees) {
      trunc.trees.push_back(tree);
      double cur = mean_logloss(predict_margin_rows(trunc, t), t.labels);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }

  TEST_CASE("auto class weighting zeroes the base margin, none keeps prevalence") {
    FeatureTable t = noisy_table(90, 3, 41);
    GBDTConfig cfg = quick_config();
    Model m = fit(t, nullptr, cfg);
    CHECK(m.base_margin == 0.0);
    cfg.auto_class_weights = false;
    Model m2 = fit(t, nullptr, cfg);
    int64_t npos = 0;
    for (int y : t.labels) npos += y;
    CHECK(m2.base_margin ==
          doctest::Approx(std::log(double(npos) / double(t.n_rows() - npos))).epsilon(1e-12));
  }

  TEST_CASE("leaf values satisfy the Newton formula and covers add up") {
    FeatureTable t = noisy_table(120, 4, 51, 0.1);
    GBDTConfig cfg;
    cfg.iterations = 12;
    cfg.learning_rate = 0.1;
    cfg.depth = 3;
    cfg.feature_subsample = 1.0;
    cfg.row_subsample = 1.0;  // tree rows = all rows, so g/h are reconstructible
    cfg.threads = 1;
    Model m = fit(t, nullptr, cfg);
    REQUIRE(m.trees.size() == 12);

    const size_t N = t.n_rows();
    int64_t npos = 0;
    for (int y : t.labels) npos += y;
    double wpos = double(N - npos) / double(npos);
    std::vector<double> F(N, m.base_margin);
    for (const Tree& tree : m.trees) {
      // per-leaf gradient and hessian sums from the margins before this tree
      std::vector<double> leaf_g(tree.nodes.size(), 0.0), leaf_h(tree.nodes.size(), 0.0);
      std::vector<int> leaf_n(tree.nodes.size(), 0);
      for (size_t i = 0; i < N; ++i) {
        int n = 0;
        while (!tree.nodes[n].is_leaf()) {
          double v = t.rows[i][tree.nodes[n].feature];
          bool left = std::isnan(v) ? tree.nodes[n].missing_left : v < tree.nodes[n].threshold;
          n = left ? tree.nodes[n].left : tree.nodes[n].right;
        }
        double w = t.labels[i] ? wpos : 1.0;
        double p = sigmoid(F[i]);
        leaf_g[n] += w * (p - t.labels[i]);
        leaf_h[n] += w * p * (1.0 - p);
        leaf_n[n] += 1;
      }
      for (size_t n = 0; n < tree.nodes.size(); ++n) {
        const TreeNode& nd = tree.nodes[n];
        if (nd.is_leaf()) {
          CHECK(std::fabs(nd.value * (leaf_h[n] + cfg.l2_leaf_reg) + leaf_g[n]) < 1e-9);
          CHECK(nd.cover == double(leaf_n[n]));
        } else {
          CHECK(nd.cover == tree.nodes[nd.left].cover + tree.nodes[nd.right].cover);
        }
      }
      CHECK(tree.nodes[0].cover == double(N));
      for (size_t i = 0; i < N; ++i) {
        int n = 0;
        while (!tree.nodes[n].is_leaf()) {
          double v = t.rows[i][tree.nodes[n].feature];
          bool left = std::isnan(v) ? tree.nodes[n].missing_left : v < tree.nodes[n].threshold;
          n = left ? tree.nodes[n].left : tree.nodes[n].right;
        }
        F[i] += cfg.learning_rate * tree.nodes[n].value;
      }
    }
  }

  TEST_CASE("margin additivity is exact across truncations") {
    FeatureTable t = noisy_table(80, 4, 61, 0.1);
    GBDTConfig cfg = quick_config();
    cfg.iterations = 10;
    Model full = fit(t, nullptr, cfg);
    REQUIRE(full.trees.size() == 10);
    for (size_t k = 0; k < full.trees.size(); ++k) {
      Model a = full;
      a.trees.resize(k);
      Model b = full;
      b.trees.resize(k + 1);
      for (size_t i = 0; i < t.n_rows(); ++i) {
        double ma = predict_margin(a, t.rows[i]);
        const Tree& tree = full.trees[k];
        int n = 0;
        while (!tree.nodes[n].is_leaf()) {
          double v = t.rows[i][tree.nodes[n].feature];
          bool left = std::isnan(v) ? tree.nodes[n].missing_left : v < tree.nodes[n].threshold;
          n = left ? tree.nodes[n].left : tree.nodes[n].right;
        }
        CHECK(predict_margin(b, t.rows[i]) == ma + cfg.learning_rate * tree.nodes[n].value);
      }
    }
  }

  TEST_CASE("tree depth never exceeds the configured limit") {
    FeatureTable t = noisy_table(150, 5, 71, 0.2);
    GBDTConfig cfg = quick_config();
    cfg.depth = 2;
    cfg.iterations = 25;
    Model m = fit(t, nullptr, cfg);
    for (const Tree& tree : m.trees) CHECK(tree.max_depth() <= 2);
  }

  TEST_CASE("identical fits are bit-identical regardless of thread count") {
    FeatureTable t = noisy_table(120, 8, 81, 0.1);
    // sprinkle missing cells
    Rng rng(5);
    for (auto& row : t.rows)
      for (double& v : row)
        if (rng.next_real() < 0.1) v = missing_value();
    GBDTConfig cfg;
    cfg.iterations = 40;
    cfg.learning_rate = 0.05;
    cfg.depth = 4;
    cfg.feature_subsample = 0.75;
    cfg.row_subsample = 0.6;
    cfg.seed = 97;
    cfg.threads = 1;
    Model m1 = fit(t, nullptr, cfg);
    cfg.threads = 8;
    Model m8 = fit(t, nullptr, cfg);
    std::string s1 = serialize(m1);
    CHECK(s1 == serialize(m8));
    cfg.threads = 1;
    CHECK(s1 == serialize(fit(t, nullptr, cfg)));  // rerun, same bytes
    cfg.seed = 98;
    CHECK(s1 != serialize(fit(t, nullptr, cfg)));  // seed actually matters
  }

  TEST_CASE("early stopping truncates at the best validation logloss") {
    // random labels on noise features: training memorizes, validation degrades
    Rng rng(123);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 80; ++i) {
      rows.push_back({rng.next_normal(), rng.next_normal(), rng.next_normal()});
      labels.push_back(int(rng.next_u64() & 1));
    }
    FeatureTable all = make_table(std::move(rows), std::move(labels));
    std::vector<size_t> tr, va;
    for (size_t i = 0; i < all.n_rows(); ++i) (i % 2 ? va : tr).push_back(i);
    FeatureTable train = subset_rows(all, tr), valid = subset_rows(all, va);

    GBDTConfig cfg;
    cfg.iterations = 120;
    cfg.learning_rate = 0.3;
    cfg.depth = 4;
    cfg.feature_subsample = 1.0;
    cfg.row_subsample = 1.0;
    cfg.threads = 1;
    Model m = fit(train, &valid, cfg);

    REQUIRE(m.valid_logloss.size() == 121);
    size_t argmin = 0;
    for (size_t k = 1; k < m.valid_logloss.size(); ++k)
      if (m.valid_logloss[k] < m.valid_logloss[argmin]) argmin = k;
    CHECK(m.best_iteration == int(argmin));
    CHECK(m.trees.size() == argmin);
    CHECK(m.best_iteration < 120);  // noise fitting must overfit
    // truncated model reproduces the recorded validation logloss exactly
    CHECK(mean_logloss(predict_margin_rows(m, valid), valid.labels) ==
          m.valid_logloss[argmin]);

    cfg.early_stopping = false;
    Model m2 = fit(train, &valid, cfg);
    CHECK(m2.trees.size() == 120);
    CHECK(m2.best_iteration == 120);
  }

  TEST_CASE("missing values route by the trained direction") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
      rows.push_back({missing_value()});
      labels.push_back(1);
    }
    for (int i = 0; i < 10; ++i) {
      rows.push_back({1.0});
      labels.push_back(0);
    }
    for (int i = 0; i < 10; ++i) {
      rows.push_back({2.0});
      labels.push_back(0);
    }
    FeatureTable t = make_table(std::move(rows), std::move(labels));
    GBDTConfig cfg;
    cfg.iterations = 20;
    cfg.learning_rate = 0.3;
    cfg.depth = 2;
    cfg.feature_subsample = 1.0;
    cfg.row_subsample = 1.0;
    cfg.threads = 1;
    Model m = fit(t, nullptr, cfg);
    CHECK(rank_auc(predict_margin_rows(m, t), t.labels) == 1.0);
    CHECK(predict_proba(m, {missing_value()}) > 0.5);
    CHECK(predict_proba(m, {1.0}) < 0.5);
    CHECK(predict_proba(m, {2.0}) < 0.5);
  }

  TEST_CASE("serialize round trip reproduces margins bit for bit") {
    FeatureTable t = noisy_table(100, 5, 91, 0.1);
    Rng rng(7);
    for (auto& row : t.rows)
      for (double& v : row)
        if (rng.next_real() < 0.08) v = missing_value();
    GBDTConfig cfg = quick_config();
    cfg.seed = 1234567890123456789ull;  // seed survives the round trip
    Model m = fit(t, nullptr, cfg);
    std::string doc = serialize(m);
    Model back = deserialize(doc);
    CHECK(back.config.seed == cfg.seed);
    CHECK(serialize(back) == doc);
    for (size_t i = 0; i < t.n_rows(); ++i)
      CHECK(predict_margin(back, t.rows[i]) == predict_margin(m, t.rows[i]));
  }

  TEST_CASE("tampered depth below the actual tree depth is rejected") {
    FeatureTable t = noisy_table(100, 4, 101, 0.1);
    GBDTConfig cfg = quick_config();
    cfg.depth = 4;
    Model m = fit(t, nullptr, cfg);
    int deepest = 0;
    for (const Tree& tree : m.trees) deepest = std::max(deepest, tree.max_depth());
    REQUIRE(deepest >= 2);
    std::string doc = serialize(m);
    std::string needle = "\"depth\": 4";
    auto pos = doc.find(needle);
    REQUIRE(pos != std::string::npos);
    doc.replace(pos, needle.size(), "\"depth\": 1");
    expect_error(ErrorCode::schema_error, [&] { deserialize(doc); });
  }

  TEST_CASE("format version mismatch is an explicit error") {
    FeatureTable t = noisy_table(30, 2, 111);
    Model m = fit(t, nullptr, quick_config());
    std::string doc = serialize(m);
    std::string needle = "ctomics-gbdt/1";
    auto pos = doc.find(needle);
    REQUIRE(pos != std::string::npos);
    doc.replace(pos, needle.size(), "ctomics-gbdt/9");
    expect_error(ErrorCode::version_mismatch, [&] { deserialize(doc); });
    expect_error(ErrorCode::schema_error, [] { deserialize("{]"); });
    expect_error(ErrorCode::schema_error, [] { deserialize("{\"format\":\"ctomics-gbdt/1\"}"); });
  }

  TEST_CASE("structurally broken documents are rejected") {
    FeatureTable t = noisy_table(40, 2, 121);
    GBDTConfig cfg = quick_config();
    cfg.iterations = 3;
    Model m = fit(t, nullptr, cfg);
    nlohmann::json doc = nlohmann::json::parse(serialize(m));
    REQUIRE(doc["trees"].size() == 3);
    REQUIRE(doc["trees"][0]["nodes"].size() > 1);

    auto broken = doc;
    broken["trees"][0]["nodes"][0]["left"] = 0;  // child must follow its parent
    expect_error(ErrorCode::schema_error, [&] { deserialize(broken.dump()); });

    broken = doc;
    broken["trees"][0]["nodes"][0]["feature"] = 99;
    expect_error(ErrorCode::schema_error, [&] { deserialize(broken.dump()); });

    broken = doc;
    broken["trees"][0]["nodes"][1].erase("cover");
    expect_error(ErrorCode::schema_error, [&] { deserialize(broken.dump()); });

    broken = doc;
    broken["config"]["learning_rate"] = 0.1;  // reals must be decimal strings
    expect_error(ErrorCode::schema_error, [&] { deserialize(broken.dump()); });
  }

  TEST_CASE("fit input validation") {
    FeatureTable empty;
    empty.feature_names = {"a"};
    expect_error(ErrorCode::empty_input, [&] { fit(empty, nullptr, quick_config()); });

    FeatureTable ones = make_table({{1.0}, {2.0}}, {1, 1});
    expect_error(ErrorCode::single_class, [&] { fit(ones, nullptr, quick_config()); });

    FeatureTable t = noisy_table(30, 2, 131);
    FeatureTable v = noisy_table(10, 3, 132);
    expect_error(ErrorCode::arity_mismatch, [&] { fit(t, &v, quick_config()); });

    FeatureTable emptyv;
    emptyv.feature_names = t.feature_names;
    expect_error(ErrorCode::empty_input, [&] { fit(t, &emptyv, quick_config()); });

    Model m = fit(t, nullptr, quick_config());
    expect_error(ErrorCode::arity_mismatch, [&] { predict_margin(m, {1.0}); });
    expect_error(ErrorCode::arity_mismatch, [&] { predict_margin_rows(m, v); });
  }
}
