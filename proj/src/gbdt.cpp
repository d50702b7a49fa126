#include "ctomics/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>

#include <json.hpp>

#include "ctomics/error.hpp"
#include "ctomics/fio.hpp"
#include "ctomics/rng.hpp"

namespace ctomics {

namespace {

constexpr const char* kFormat = "ctomics-gbdt/1";
constexpr double kMinChildHessian = 1e-3;

double softplus(double x) { return x > 35.0 ? x : std::log1p(std::exp(x)); }

}  // namespace

double sigmoid(double margin) { return 1.0 / (1.0 + std::exp(-margin)); }

double mean_logloss(const std::vector<double>& margins, const std::vector<int>& labels) {
  if (margins.size() != labels.size())
    fail(ErrorCode::arity_mismatch, "margins and labels differ in length");
  if (margins.empty()) fail(ErrorCode::empty_input, "logloss of an empty set");
  double s = 0.0;
  for (size_t i = 0; i < margins.size(); ++i)
    s += labels[i] ? softplus(-margins[i]) : softplus(margins[i]);
  return s / static_cast<double>(margins.size());
}

void validate_config(const GBDTConfig& cfg) {
  // iterations 0 is legal: the model is then the base margin alone
  if (cfg.iterations < 0) fail(ErrorCode::bad_config, "iterations must be >= 0");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate))
    fail(ErrorCode::bad_config, "learning_rate must be positive");
  if (cfg.depth < 1) fail(ErrorCode::bad_config, "depth must be >= 1");
  if (!(cfg.l2_leaf_reg >= 0.0) || !std::isfinite(cfg.l2_leaf_reg))
    fail(ErrorCode::bad_config, "l2_leaf_reg must be >= 0");
  if (!(cfg.feature_subsample > 0.0 && cfg.feature_subsample <= 1.0))
    fail(ErrorCode::bad_config, "feature_subsample must be in (0,1]");
  if (cfg.border_count < 1 || cfg.border_count > 60000)
    fail(ErrorCode::bad_config, "border_count must be in [1,60000]");
  if (!(cfg.row_subsample > 0.0 && cfg.row_subsample <= 1.0))
    fail(ErrorCode::bad_config, "row_subsample must be in (0,1]");
  if (cfg.threads < 1) fail(ErrorCode::bad_config, "threads must be >= 1");
}

int BinMapper::bin_of(int feature, double v) const {
  const auto& b = boundaries[feature];
  if (std::isnan(v)) return static_cast<int>(b.size()) + 1;
  return static_cast<int>(std::upper_bound(b.begin(), b.end(), v) - b.begin());
}

BinMapper bin_features(const FeatureTable& table, int border_count) {
  if (table.n_rows() == 0) fail(ErrorCode::empty_input, "cannot bin an empty table");
  if (border_count < 1) fail(ErrorCode::bad_config, "border_count must be >= 1");
  BinMapper mapper;
  mapper.boundaries.resize(table.n_features());
  for (size_t f = 0; f < table.n_features(); ++f) {
    std::vector<double> vals;
    vals.reserve(table.n_rows());
    for (const auto& row : table.rows)
      if (!is_missing(row[f])) vals.push_back(row[f]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    auto& b = mapper.boundaries[f];
    size_t m = vals.size();
    if (m < 2) continue;
    if (m <= static_cast<size_t>(border_count)) {
      for (size_t k = 1; k < m; ++k) b.push_back((vals[k - 1] + vals[k]) / 2.0);
    } else {
      // quantile cut positions over the distinct values; m > border_count
      // makes the positions strictly increasing, so exactly border_count-1
      for (int j = 1; j < border_count; ++j) {
        size_t k = static_cast<size_t>(j) * m / static_cast<size_t>(border_count);
        b.push_back((vals[k - 1] + vals[k]) / 2.0);
      }
      b.erase(std::unique(b.begin(), b.end()), b.end());
    }
  }
  return mapper;
}

int Tree::max_depth() const {
  if (nodes.empty()) return 0;
  int best = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [n, d] = stack.back();
    stack.pop_back();
    if (nodes[n].is_leaf()) {
      best = std::max(best, d);
      continue;
    }
    stack.push_back({nodes[n].left, d + 1});
    stack.push_back({nodes[n].right, d + 1});
  }
  return best;
}

namespace {

const TreeNode& route_leaf(const Tree& tree, const double* row) {
  int n = 0;
  while (!tree.nodes[n].is_leaf()) {
    const TreeNode& nd = tree.nodes[n];
    double v = row[nd.feature];
    n = (std::isnan(v) ? nd.missing_left : v < nd.threshold) ? nd.left : nd.right;
  }
  return tree.nodes[n];
}

struct FeatSplit {
  double gain = 0.0;
  int bin = -1;
  bool missing_left = true;
};

}  // namespace

Model fit(const FeatureTable& train, const FeatureTable* valid, const GBDTConfig& cfg) {
  validate_config(cfg);
  const size_t N = train.n_rows();
  const size_t M = train.n_features();
  if (N == 0) fail(ErrorCode::empty_input, "training table has no rows");
  if (valid && valid->n_rows() == 0)
    fail(ErrorCode::empty_input, "validation table has no rows");
  if (valid && valid->feature_names != train.feature_names)
    fail(ErrorCode::arity_mismatch, "validation columns differ from training columns");

  int64_t npos = 0;
  for (int y : train.labels) npos += y;
  const int64_t nneg = static_cast<int64_t>(N) - npos;
  if (npos == 0 || nneg == 0)
    fail(ErrorCode::single_class, "training set needs both labels");

  const BinMapper mapper = bin_features(train, cfg.border_count);
  std::vector<std::vector<uint16_t>> binned(M);
  for (size_t f = 0; f < M; ++f) {
    binned[f].resize(N);
    for (size_t i = 0; i < N; ++i)
      binned[f][i] = static_cast<uint16_t>(mapper.bin_of(static_cast<int>(f), train.rows[i][f]));
  }

  const double wpos =
      cfg.auto_class_weights ? static_cast<double>(nneg) / static_cast<double>(npos) : 1.0;
  const double lambda = cfg.l2_leaf_reg;
  const int nt = cfg.threads;

  Model model;
  model.feature_names = train.feature_names;
  model.config = cfg;
  // auto weighting equalizes the classes, so the weighted log-odds is 0 exactly
  model.base_margin = cfg.auto_class_weights
                          ? 0.0
                          : std::log(static_cast<double>(npos) / static_cast<double>(nneg));

  std::vector<double> w(N);
  for (size_t i = 0; i < N; ++i) w[i] = train.labels[i] ? wpos : 1.0;
  std::vector<double> F(N, model.base_margin);
  std::vector<double> g(N, 0.0), h(N, 0.0);

  const size_t Nv = valid ? valid->n_rows() : 0;
  std::vector<double> Fv(Nv, model.base_margin);
  if (valid) model.valid_logloss.push_back(mean_logloss(Fv, valid->labels));

  std::vector<int> all_features(M);
  for (size_t f = 0; f < M; ++f) all_features[f] = static_cast<int>(f);

  for (int t = 0; t < cfg.iterations; ++t) {
    Rng rng(derive_seed(cfg.seed, static_cast<uint64_t>(t)));

    std::vector<int> subset;
    if (cfg.feature_subsample < 1.0 && M > 1) {
      size_t k = static_cast<size_t>(
          std::max<long long>(1, std::llround(cfg.feature_subsample * static_cast<double>(M))));
      std::vector<int> perm = all_features;
      rng.shuffle(perm);
      perm.resize(std::min(k, M));
      std::sort(perm.begin(), perm.end());
      subset = std::move(perm);
    } else {
      subset = all_features;
    }

    std::vector<int> sample;
    if (cfg.row_subsample < 1.0) {
      for (size_t i = 0; i < N; ++i)
        if (rng.next_real() < cfg.row_subsample) sample.push_back(static_cast<int>(i));
    } else {
      sample.resize(N);
      for (size_t i = 0; i < N; ++i) sample[i] = static_cast<int>(i);
    }

    for (int i : sample) {
      double p = sigmoid(F[i]);
      g[i] = w[i] * (p - train.labels[i]);
      h[i] = w[i] * p * (1.0 - p);
    }

    Tree tree;
    std::vector<std::vector<int>> node_rows;
    std::vector<double> node_g, node_h;
    auto add_node = [&](std::vector<int>&& rows) {
      double G = 0.0, H = 0.0;
      for (int i : rows) {
        G += g[i];
        H += h[i];
      }
      tree.nodes.emplace_back();
      tree.nodes.back().cover = static_cast<double>(rows.size());
      node_rows.push_back(std::move(rows));
      node_g.push_back(G);
      node_h.push_back(H);
      return static_cast<int>(tree.nodes.size()) - 1;
    };
    add_node(std::move(sample));

    std::vector<int> frontier{0};
    for (int level = 0; level < cfg.depth && !frontier.empty(); ++level) {
      std::vector<int> next;
      for (int n : frontier) {
        const std::vector<int>& rows = node_rows[n];
        if (rows.size() < 2) continue;
        const double Gt = node_g[n], Ht = node_h[n];
        const double parent = Gt * Gt / (Ht + lambda);

        std::vector<FeatSplit> per_feature(subset.size());
#pragma omp parallel for num_threads(nt) schedule(static) if (nt > 1)
        for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(subset.size()); ++si) {
          const int f = subset[si];
          const int nb = mapper.value_bins(f);
          std::vector<double> hg(nb + 1, 0.0), hh(nb + 1, 0.0);
          const auto& col = binned[f];
          for (int i : rows) {
            hg[col[i]] += g[i];
            hh[col[i]] += h[i];
          }
          const double Gm = hg[nb], Hm = hh[nb];
          FeatSplit best;
          double pg = 0.0, ph = 0.0;
          for (int bt = 0; bt + 1 < nb; ++bt) {
            pg += hg[bt];
            ph += hh[bt];
            for (int ml = 1; ml >= 0; --ml) {
              const double GL = pg + (ml ? Gm : 0.0);
              const double HL = ph + (ml ? Hm : 0.0);
              const double GR = Gt - GL;
              const double HR = Ht - HL;
              if (HL < kMinChildHessian || HR < kMinChildHessian) continue;
              const double gain =
                  0.5 * (GL * GL / (HL + lambda) + GR * GR / (HR + lambda) - parent);
              if (gain > best.gain) best = FeatSplit{gain, bt, ml != 0};
            }
          }
          per_feature[si] = best;
        }

        double best_gain = 0.0;
        int best_f = -1, best_bin = -1;
        bool best_ml = true;
        for (size_t si = 0; si < subset.size(); ++si) {
          if (per_feature[si].bin >= 0 && per_feature[si].gain > best_gain) {
            best_gain = per_feature[si].gain;
            best_f = subset[si];
            best_bin = per_feature[si].bin;
            best_ml = per_feature[si].missing_left;
          }
        }
        if (best_f < 0) continue;

        const auto& col = binned[best_f];
        const int mb = mapper.missing_bin(best_f);
        std::vector<int> lrows, rrows;
        for (int i : rows) {
          const int b = col[i];
          const bool left = (b == mb) ? best_ml : (b <= best_bin);
          (left ? lrows : rrows).push_back(i);
        }
        tree.nodes[n].feature = best_f;
        tree.nodes[n].threshold = mapper.boundaries[best_f][best_bin];
        tree.nodes[n].missing_left = best_ml;
        const int li = add_node(std::move(lrows));
        const int ri = add_node(std::move(rrows));
        tree.nodes[n].left = li;
        tree.nodes[n].right = ri;
        next.push_back(li);
        next.push_back(ri);
      }
      frontier.swap(next);
    }

    for (size_t n = 0; n < tree.nodes.size(); ++n) {
      if (!tree.nodes[n].is_leaf()) continue;
      const double denom = node_h[n] + lambda;
      tree.nodes[n].value = denom > 0.0 ? -node_g[n] / denom : 0.0;
    }

    const double lr = cfg.learning_rate;
#pragma omp parallel for num_threads(nt) schedule(static) if (nt > 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(N); ++i)
      F[i] += lr * route_leaf(tree, train.rows[i].data()).value;
    if (valid) {
#pragma omp parallel for num_threads(nt) schedule(static) if (nt > 1)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(Nv); ++i)
        Fv[i] += lr * route_leaf(tree, valid->rows[i].data()).value;
    }

    model.trees.push_back(std::move(tree));
    if (valid) model.valid_logloss.push_back(mean_logloss(Fv, valid->labels));
  }

  model.best_iteration = static_cast<int>(model.trees.size());
  if (valid && cfg.early_stopping) {
    size_t best = 0;
    for (size_t k = 1; k < model.valid_logloss.size(); ++k)
      if (model.valid_logloss[k] < model.valid_logloss[best]) best = k;
    model.best_iteration = static_cast<int>(best);
    model.trees.resize(best);
  }
  return model;
}

double predict_margin(const Model& model, const std::vector<double>& row) {
  if (row.size() != model.feature_names.size())
    fail(ErrorCode::arity_mismatch, "row arity does not match model features");
  double m = model.base_margin;
  for (const Tree& tree : model.trees)
    m += model.config.learning_rate * route_leaf(tree, row.data()).value;
  return m;
}

double predict_proba(const Model& model, const std::vector<double>& row) {
  return sigmoid(predict_margin(model, row));
}

std::vector<double> predict_margin_rows(const Model& model, const FeatureTable& table) {
  if (table.feature_names != model.feature_names)
    fail(ErrorCode::arity_mismatch, "table columns do not match model features");
  std::vector<double> out(table.n_rows());
  for (size_t i = 0; i < table.n_rows(); ++i) out[i] = predict_margin(model, table.rows[i]);
  return out;
}

namespace {

using nlohmann::json;

// threads is an execution knob, not part of the learned artifact, so the
// document stays byte-identical across thread counts
json config_json(const GBDTConfig& c) {
  json j;
  j["iterations"] = c.iterations;
  j["learning_rate"] = format_double(c.learning_rate);
  j["depth"] = c.depth;
  j["l2_leaf_reg"] = format_double(c.l2_leaf_reg);
  j["feature_subsample"] = format_double(c.feature_subsample);
  j["border_count"] = c.border_count;
  j["row_subsample"] = format_double(c.row_subsample);
  j["class_weighting"] = c.auto_class_weights ? "auto" : "none";
  j["early_stopping"] = c.early_stopping;
  j["seed"] = c.seed;
  return j;
}

const json& need(const json& o, const char* key) {
  auto it = o.find(key);
  if (it == o.end()) fail(ErrorCode::schema_error, std::string("missing field: ") + key);
  return *it;
}

double real_field(const json& o, const char* key) {
  const json& v = need(o, key);
  if (!v.is_string()) fail(ErrorCode::schema_error, std::string(key) + " must be a decimal string");
  return parse_double(v.get<std::string>());
}

int int_field(const json& o, const char* key) {
  const json& v = need(o, key);
  if (!v.is_number_integer())
    fail(ErrorCode::schema_error, std::string(key) + " must be an integer");
  return v.get<int>();
}

bool bool_field(const json& o, const char* key) {
  const json& v = need(o, key);
  if (!v.is_boolean()) fail(ErrorCode::schema_error, std::string(key) + " must be a boolean");
  return v.get<bool>();
}

}  // namespace

std::string serialize(const Model& model) {
  json doc;
  doc["format"] = kFormat;
  doc["base_margin"] = format_double(model.base_margin);
  doc["best_iteration"] = model.best_iteration;
  doc["config"] = config_json(model.config);
  doc["feature_names"] = model.feature_names;
  json trees = json::array();
  for (const Tree& tree : model.trees) {
    json nodes = json::array();
    for (const TreeNode& n : tree.nodes) {
      json jn;
      jn["cover"] = format_double(n.cover);
      if (n.is_leaf()) {
        jn["value"] = format_double(n.value);
      } else {
        jn["feature"] = n.feature;
        jn["threshold"] = format_double(n.threshold);
        jn["missing_left"] = n.missing_left;
        jn["left"] = n.left;
        jn["right"] = n.right;
      }
      nodes.push_back(std::move(jn));
    }
    json jt;
    jt["nodes"] = std::move(nodes);
    trees.push_back(std::move(jt));
  }
  doc["trees"] = std::move(trees);
  return doc.dump(2) + "\n";
}

Model deserialize(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_error, std::string("model document is not valid json: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::schema_error, "model document must be an object");
  const json& fmt = need(doc, "format");
  if (!fmt.is_string() || fmt.get<std::string>() != kFormat)
    fail(ErrorCode::version_mismatch,
         "unsupported model format: " + fmt.dump() + ", expected " + std::string(kFormat));

  Model model;
  model.base_margin = real_field(doc, "base_margin");
  model.best_iteration = int_field(doc, "best_iteration");

  const json& jc = need(doc, "config");
  if (!jc.is_object()) fail(ErrorCode::schema_error, "config must be an object");
  GBDTConfig c;
  c.iterations = int_field(jc, "iterations");
  c.learning_rate = real_field(jc, "learning_rate");
  c.depth = int_field(jc, "depth");
  c.l2_leaf_reg = real_field(jc, "l2_leaf_reg");
  c.feature_subsample = real_field(jc, "feature_subsample");
  c.border_count = int_field(jc, "border_count");
  c.row_subsample = real_field(jc, "row_subsample");
  const json& cw = need(jc, "class_weighting");
  if (!cw.is_string() || (cw != "auto" && cw != "none"))
    fail(ErrorCode::schema_error, "class_weighting must be auto or none");
  c.auto_class_weights = cw == "auto";
  c.early_stopping = bool_field(jc, "early_stopping");
  const json& js = need(jc, "seed");
  if (!js.is_number_integer() && !js.is_number_unsigned())
    fail(ErrorCode::schema_error, "seed must be an integer");
  c.seed = js.get<uint64_t>();
  c.threads = 1;
  validate_config(c);
  model.config = c;

  const json& names = need(doc, "feature_names");
  if (!names.is_array()) fail(ErrorCode::schema_error, "feature_names must be an array");
  for (const auto& n : names) {
    if (!n.is_string()) fail(ErrorCode::schema_error, "feature names must be strings");
    model.feature_names.push_back(n.get<std::string>());
  }
  const int M = static_cast<int>(model.feature_names.size());

  const json& jtrees = need(doc, "trees");
  if (!jtrees.is_array()) fail(ErrorCode::schema_error, "trees must be an array");
  for (const auto& jt : jtrees) {
    const json& jnodes = need(jt, "nodes");
    if (!jnodes.is_array() || jnodes.empty())
      fail(ErrorCode::schema_error, "tree nodes must be a nonempty array");
    Tree tree;
    const int count = static_cast<int>(jnodes.size());
    std::vector<int> referenced(count, 0);
    for (int idx = 0; idx < count; ++idx) {
      const json& jn = jnodes[idx];
      TreeNode n;
      n.cover = real_field(jn, "cover");
      if (jn.contains("feature")) {
        n.feature = int_field(jn, "feature");
        if (n.feature < 0 || n.feature >= M)
          fail(ErrorCode::schema_error, "node feature index out of range");
        n.threshold = real_field(jn, "threshold");
        n.missing_left = bool_field(jn, "missing_left");
        n.left = int_field(jn, "left");
        n.right = int_field(jn, "right");
        for (int child : {n.left, n.right}) {
          if (child <= idx || child >= count)
            fail(ErrorCode::schema_error, "child index must follow its parent");
          referenced[child] += 1;
        }
      } else {
        n.feature = -1;
        n.value = real_field(jn, "value");
      }
      tree.nodes.push_back(n);
    }
    for (int idx = 1; idx < count; ++idx)
      if (referenced[idx] != 1)
        fail(ErrorCode::schema_error, "every non-root node needs exactly one parent");
    if (tree.max_depth() > c.depth)
      fail(ErrorCode::schema_error, "tree deeper than the configured depth limit");
    tree.nodes.shrink_to_fit();
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace ctomics
