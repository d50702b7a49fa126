#include "ctomics/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <utility>

#include "ctomics/calcium.hpp"
#include "ctomics/csv.hpp"
#include "ctomics/error.hpp"
#include "ctomics/eval.hpp"
#include "ctomics/fat.hpp"
#include "ctomics/fio.hpp"
#include "ctomics/gbdt.hpp"
#include "ctomics/phantom.hpp"
#include "ctomics/registry.hpp"
#include "ctomics/rng.hpp"
#include "ctomics/shap.hpp"
#include "ctomics/stats.hpp"
#include "ctomics/volume.hpp"

namespace ctomics {

namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

ojson load_config(const std::string& path) {
  ojson j;
  try {
    j = ojson::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_config, "config parse: " + std::string(e.what()));
  }
  if (!j.is_object()) fail(ErrorCode::bad_config, "config must be a JSON object");
  return j;
}

void check_keys(const ojson& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      fail(ErrorCode::bad_config, "unknown key '" + it.key() + "' in " + where);
}

const ojson& need(const ojson& j, const char* key) {
  if (!j.contains(key))
    fail(ErrorCode::bad_config, std::string("missing config key '") + key + "'");
  return j[key];
}

std::string str_req(const ojson& j, const char* key) {
  const ojson& v = need(j, key);
  if (!v.is_string())
    fail(ErrorCode::bad_config, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

int int_or(const ojson& j, const char* key, int def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_integer())
    fail(ErrorCode::bad_config, std::string("'") + key + "' must be an integer");
  return j[key].get<int>();
}

double num_or(const ojson& j, const char* key, double def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number())
    fail(ErrorCode::bad_config, std::string("'") + key + "' must be a number");
  return j[key].get<double>();
}

bool bool_or(const ojson& j, const char* key, bool def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_boolean())
    fail(ErrorCode::bad_config, std::string("'") + key + "' must be a boolean");
  return j[key].get<bool>();
}

uint64_t master_seed(const ojson& cfg, const PipelineIO& io) {
  if (io.seed_overridden) return io.seed;
  if (!cfg.contains("seed")) return 0;
  if (!cfg["seed"].is_number_integer() && !cfg["seed"].is_number_unsigned())
    fail(ErrorCode::bad_config, "'seed' must be an integer");
  return cfg["seed"].get<uint64_t>();
}

// seed and threads are deliberately not accepted here: the seed is the
// master seed, threads must never influence artifacts
GBDTConfig gbdt_from(const ojson& cfg, uint64_t seed, int threads) {
  GBDTConfig g;
  g.seed = seed;
  g.threads = threads;
  if (!cfg.contains("gbdt")) {
    validate_config(g);
    return g;
  }
  const ojson& j = cfg["gbdt"];
  if (!j.is_object()) fail(ErrorCode::bad_config, "'gbdt' must be an object");
  check_keys(j,
             {"iterations", "learning_rate", "depth", "l2_leaf_reg",
              "feature_subsample", "border_count", "row_subsample",
              "auto_class_weights", "early_stopping"},
             "gbdt block");
  g.iterations = int_or(j, "iterations", g.iterations);
  g.learning_rate = num_or(j, "learning_rate", g.learning_rate);
  g.depth = int_or(j, "depth", g.depth);
  g.l2_leaf_reg = num_or(j, "l2_leaf_reg", g.l2_leaf_reg);
  g.feature_subsample = num_or(j, "feature_subsample", g.feature_subsample);
  g.border_count = int_or(j, "border_count", g.border_count);
  g.row_subsample = num_or(j, "row_subsample", g.row_subsample);
  g.auto_class_weights = bool_or(j, "auto_class_weights", g.auto_class_weights);
  g.early_stopping = bool_or(j, "early_stopping", g.early_stopping);
  validate_config(g);
  return g;
}

std::string join_out(const PipelineIO& io, const std::string& name) {
  return (fs::path(io.out_dir) / name).string();
}

void emit(RunSummary& s, const PipelineIO& io, const std::string& name,
          const std::string& bytes) {
  fs::create_directories(io.out_dir);
  write_file_atomic(join_out(io, name), bytes);
  s.artifacts.push_back(name);
}

void finish(RunSummary& s, const PipelineIO& io) {
  fs::create_directories(io.out_dir);
  write_file_atomic(join_out(io, s.command + "_summary.json"), s.json());
}

// train/evaluate/gridsearch column restriction: a selected-names file, a
// model group, or neither (all features)
std::vector<std::string> restrict_columns(const ojson& cfg,
                                          const FeatureTable& table) {
  const bool has_cols = cfg.contains("columns");
  const bool has_group = cfg.contains("group");
  if (has_cols && has_group)
    fail(ErrorCode::bad_config, "give either 'columns' or 'group', not both");
  if (has_group)
    return model_group_columns(str_req(cfg, "group"), table.feature_names);
  if (!has_cols) return {};
  std::vector<std::string> names;
  for (const auto& row : parse_csv(read_file(str_req(cfg, "columns"))))
    if (!row.empty() && !row[0].empty()) names.push_back(row[0]);
  if (names.empty()) fail(ErrorCode::bad_config, "column list file is empty");
  return names;
}

std::string lines_of(const std::vector<std::string>& names) {
  std::string out;
  for (const std::string& n : names) out += n + "\n";
  return out;
}

std::string scores_csv(const FeatureTable& table, const MetricsReport& rep) {
  CsvWriter w;
  w.cell("patient_id");
  w.cell("label");
  w.cell("score");
  w.cell("prediction");
  w.end_row();
  for (size_t i = 0; i < rep.scores_repeat0.size(); ++i) {
    w.cell(table.patient_ids[i]);
    w.cell(double(rep.labels_repeat0[i]));
    w.cell(rep.scores_repeat0[i]);
    w.cell(rep.scores_repeat0[i] >= rep.threshold ? 1.0 : 0.0);
    w.end_row();
  }
  return w.text();
}

struct ScoreFile {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> scores;
  std::vector<int> preds;
};

ScoreFile read_scores(const std::string& path) {
  auto rows = parse_csv(read_file(path));
  if (rows.empty() ||
      rows[0] != std::vector<std::string>{"patient_id", "label", "score",
                                          "prediction"})
    fail(ErrorCode::schema_error,
         "score file needs header patient_id,label,score,prediction: " + path);
  ScoreFile f;
  for (size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 4)
      fail(ErrorCode::schema_error, "bad score row in " + path);
    f.ids.push_back(rows[r][0]);
    f.labels.push_back(int(parse_double(rows[r][1])));
    f.scores.push_back(parse_double(rows[r][2]));
    f.preds.push_back(int(parse_double(rows[r][3])));
  }
  return f;
}

// ----- phantom dataset synthesis -----

struct Range {
  double lo = 0, hi = 0;
};

Range range_or(const ojson& j, const char* key, Range def) {
  if (!j.contains(key)) return def;
  const ojson& v = j[key];
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    fail(ErrorCode::bad_config, std::string("'") + key + "' must be [lo, hi]");
  Range r{v[0].get<double>(), v[1].get<double>()};
  if (r.hi < r.lo)
    fail(ErrorCode::bad_config, std::string("'") + key + "' has hi < lo");
  return r;
}

std::array<double, 3> arr3_or(const ojson& j, const char* key,
                              std::array<double, 3> def) {
  if (!j.contains(key)) return def;
  const ojson& v = j[key];
  if (!v.is_array() || v.size() != 3)
    fail(ErrorCode::bad_config, std::string("'") + key + "' must have 3 entries");
  for (int a = 0; a < 3; ++a) {
    if (!v[a].is_number())
      fail(ErrorCode::bad_config, std::string("'") + key + "' must be numeric");
    def[a] = v[a].get<double>();
  }
  return def;
}

double uniform_in(Rng& rng, Range r) {
  return r.lo + (r.hi - r.lo) * rng.next_real();
}

int uniform_int(Rng& rng, Range r) {
  const int lo = int(std::llround(r.lo)), hi = int(std::llround(r.hi));
  return lo + int(rng.next_below(uint64_t(hi - lo + 1)));
}

double round_to(double v, double step) { return std::round(v / step) * step; }

double clinical_value(const RegistryEntry& e, Rng& rng) {
  if (e.unit == "binary") return rng.next_below(100) < 35 ? 1.0 : 0.0;
  if (e.unit == "level") return double(rng.next_below(3));
  if (e.unit == "years")
    return std::clamp(std::round(56.0 + 11.0 * rng.next_normal()), 30.0, 85.0);
  if (e.unit == "kg_m2")
    return std::clamp(round_to(27.0 + 4.0 * rng.next_normal(), 0.1), 16.0, 45.0);
  if (e.unit == "m")
    return std::clamp(round_to(1.70 + 0.10 * rng.next_normal(), 0.01), 1.4, 2.1);
  if (e.unit == "kg")
    return std::clamp(round_to(82.0 + 16.0 * rng.next_normal(), 0.1), 40.0, 160.0);
  if (e.unit == "mmol_l")
    return std::clamp(round_to(5.2 + 1.1 * rng.next_normal(), 0.01), 0.5, 12.0);
  if (e.unit == "mmHg")
    return std::clamp(std::round(122.0 + 18.0 * rng.next_normal()), 70.0, 220.0);
  if (e.unit == "per_day") return double(rng.next_below(21));
  return round_to(rng.next_normal(), 0.001);
}

std::vector<double> zscores(const std::vector<double>& v) {
  std::vector<double> z(v.size(), 0.0);
  if (v.empty()) return z;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= double(v.size());
  if (var <= 0) return z;
  const double sd = std::sqrt(var);
  for (size_t i = 0; i < v.size(); ++i) z[i] = (v[i] - mean) / sd;
  return z;
}

}  // namespace

std::string RunSummary::json() const {
  ojson j;
  j["summary"] = "ctomics-run/1";
  j["command"] = command;
  j["seed"] = seed;
  j["items"] = items;
  j["ok"] = items - int(failures.size());
  j["failures"] = failures;
  j["artifacts"] = artifacts;
  return j.dump(2) + "\n";
}

int cad_rads_to_label(const std::string& category) {
  if (category == "4A" || category == "4B" || category == "5") return 1;
  if (category == "0" || category == "1" || category == "2" || category == "3")
    return 0;
  fail(ErrorCode::bad_argument, "unknown CAD-RADS category '" + category + "'");
}

std::vector<std::string> model_group_columns(const std::string& group,
                                             const std::vector<std::string>& names) {
  std::vector<std::string> prefixes;
  if (group == "clinical")
    prefixes = {"clin_"};
  else if (group == "clinical+calcium")
    prefixes = {"clin_", "ca_"};
  else if (group == "clinical+calcium+fat")
    prefixes = {"clin_", "ca_", "fat_"};
  else
    fail(ErrorCode::bad_config, "unknown model group '" + group + "'");
  std::vector<std::string> out;
  for (const std::string& n : names)
    for (const std::string& p : prefixes)
      if (n.rfind(p, 0) == 0) {
        out.push_back(n);
        break;
      }
  if (out.empty())
    fail(ErrorCode::bad_config, "model group '" + group + "' matches no columns");
  return out;
}

RunSummary run_extract(const PipelineIO& io) {
  ojson cfg = load_config(io.config_path);
  check_keys(cfg, {"manifest", "seed"}, "extract config");
  RunSummary s;
  s.command = "extract";
  s.seed = master_seed(cfg, io);

  const std::string manifest_path = str_req(cfg, "manifest");
  const fs::path base = fs::path(manifest_path).parent_path();
  const auto rows = parse_csv(read_file(manifest_path));
  if (rows.empty()) fail(ErrorCode::schema_error, "manifest is empty");

  std::vector<std::string> expect = {"patient_id",        "volume",
                                     "heart_mask",        "pericardium_mask",
                                     "territory_mask",    "cad_rads"};
  for (const RegistryEntry& e : clinical_registry()) expect.push_back(e.name);
  if (rows[0] != expect)
    fail(ErrorCode::schema_error,
         "manifest header must be the six fixed columns then the clinical registry");
  const int n = int(rows.size()) - 1;
  if (n < 1) fail(ErrorCode::empty_input, "manifest lists no patients");
  for (size_t r = 1; r < rows.size(); ++r)
    if (rows[r].size() != expect.size())
      fail(ErrorCode::schema_error,
           "manifest row " + std::to_string(r) + " has " +
               std::to_string(rows[r].size()) + " cells, expected " +
               std::to_string(expect.size()));

  const std::vector<std::string> names = all_feature_names();
  const size_t n_clin = clinical_registry().size();
  std::vector<std::vector<double>> feat(n);
  std::vector<int> labels(n, 0);
  std::vector<std::string> errs(n);
  std::vector<uint8_t> ok(n, 0);

#pragma omp parallel for schedule(dynamic) num_threads(io.threads) if (io.threads > 1)
  for (int i = 0; i < n; ++i) {
    const std::vector<std::string>& row = rows[i + 1];
    try {
      const int label = cad_rads_to_label(row[5]);
      auto resolve = [&](const std::string& p) {
        return fs::path(p).is_absolute() ? p : (base / p).string();
      };
      const Volume ct = load_volume(resolve(row[1]));
      const MaskVolume heart = load_mask(resolve(row[2]));
      const MaskVolume peri = load_mask(resolve(row[3]));
      const MaskVolume terr = load_mask(resolve(row[4]));
      const CalciumResult ca = extract_calcium(ct, heart, terr);
      const FatResult fat = extract_fat(ct, peri, 1);

      std::vector<double> v;
      v.reserve(names.size());
      for (size_t c = 0; c < n_clin; ++c) {
        const std::string& cell = row[6 + c];
        v.push_back(cell.empty() ? missing_value() : parse_double(cell));
      }
      v.insert(v.end(), ca.features.begin(), ca.features.end());
      v.insert(v.end(), fat.features.begin(), fat.features.end());
      feat[i] = std::move(v);
      labels[i] = label;
      ok[i] = 1;
    } catch (const std::exception& e) {
      errs[i] = e.what();
    }
  }

  FeatureTable table;
  table.feature_names = names;
  for (int i = 0; i < n; ++i) {
    if (!ok[i]) {
      s.failures.push_back(rows[i + 1][0] + ": " + errs[i]);
      continue;
    }
    table.patient_ids.push_back(rows[i + 1][0]);
    table.labels.push_back(labels[i]);
    table.rows.push_back(std::move(feat[i]));
  }
  s.items = n;

  emit(s, io, "features.csv", feature_table_csv(table));
  emit(s, io, "clinical.registry.txt", registry_text("clinical"));
  emit(s, io, "calcium.registry.txt", registry_text("calcium"));
  emit(s, io, "fat.registry.txt", registry_text("fat"));
  finish(s, io);
  return s;
}

RunSummary run_select(const PipelineIO& io) {
  ojson cfg = load_config(io.config_path);
  check_keys(cfg, {"features", "top_k", "folds", "gbdt", "seed"}, "select config");
  RunSummary s;
  s.command = "select";
  s.seed = master_seed(cfg, io);
  s.items = 1;

  const FeatureTable table = load_feature_table(str_req(cfg, "features"));
  const GBDTConfig g = gbdt_from(cfg, s.seed, io.threads);
  const int top_k =
      int_or(cfg, "top_k", std::min(40, int(table.n_features())));
  const int folds = int_or(cfg, "folds", 5);

  const ImportanceRanking rank = select_features_cv(table, g, top_k, folds);
  emit(s, io, "importance.csv", importance_csv(rank));
  emit(s, io, "selected.txt", lines_of(rank.selected));
  finish(s, io);
  return s;
}

RunSummary run_train(const PipelineIO& io) {
  ojson cfg = load_config(io.config_path);
  check_keys(cfg, {"features", "columns", "group", "gbdt", "seed"}, "train config");
  RunSummary s;
  s.command = "train";
  s.seed = master_seed(cfg, io);
  s.items = 1;

  FeatureTable table = load_feature_table(str_req(cfg, "features"));
  const std::vector<std::string> cols = restrict_columns(cfg, table);
  if (!cols.empty()) table = subset_columns(table, cols);
  const GBDTConfig g = gbdt_from(cfg, s.seed, io.threads);

  const Model model = train_fold_model(table, g, s.seed);
  emit(s, io, "model.json", serialize(model));
  finish(s, io);
  return s;
}

RunSummary run_evaluate(const PipelineIO& io) {
  ojson cfg = load_config(io.config_path);
  check_keys(cfg,
             {"features", "columns", "group", "repeats", "folds", "threshold",
              "gbdt", "seed"},
             "evaluate config");
  RunSummary s;
  s.command = "evaluate";
  s.seed = master_seed(cfg, io);
  s.items = 1;

  const FeatureTable table = load_feature_table(str_req(cfg, "features"));
  const std::vector<std::string> cols = restrict_columns(cfg, table);
  const GBDTConfig g = gbdt_from(cfg, s.seed, io.threads);
  const int repeats = int_or(cfg, "repeats", 5);
  const int folds = int_or(cfg, "folds", 5);
  const double threshold = num_or(cfg, "threshold", 0.5);

  const MetricsReport rep =
      repeated_cv(table, g, folds, repeats, threshold, cols, io.threads);
  emit(s, io, "metrics.txt", metrics_report_text(rep));
  emit(s, io, "roc.csv", roc_curve_csv(rep.roc_repeat0));
  emit(s, io, "pr.csv", pr_curve_csv(rep.pr_repeat0));
  emit(s, io, "scores.csv", scores_csv(table, rep));
  finish(s, io);
  return s;
}

RunSummary run_compare(const PipelineIO& io) {
  ojson cfg = load_config(io.config_path);
  check_keys(cfg, {"a", "b", "seed"}, "compare config");
  RunSummary s;
  s.command = "compare";
  s.seed = master_seed(cfg, io);
  s.items = 1;

  const ScoreFile a = read_scores(str_req(cfg, "a"));
  const ScoreFile b = read_scores(str_req(cfg, "b"));
  if (a.ids != b.ids)
    fail(ErrorCode::bad_argument, "score files list different patients");
  if (a.labels != b.labels)
    fail(ErrorCode::bad_argument, "score files disagree on labels");

  const DeLongResult d = delong_test(a.scores, b.scores, a.labels);
  const McNemarResult m = mcnemar_test(a.preds, b.preds, a.labels);

  std::string out;
  out += "# paired model comparison\n";
  out += "rows\t" + std::to_string(a.ids.size()) + "\n";
  out += "auroc_a\t" + format_double(d.auc_a) + "\n";
  out += "auroc_b\t" + format_double(d.auc_b) + "\n";
  out += "delong_variance\t" + format_double(d.variance) + "\n";
  out += "delong_z\t" + format_double(d.z) + "\n";
  out += "delong_p\t" + format_double(d.p) + "\n";
  out += "mcnemar_b\t" + std::to_string(m.b) + "\n";
  out += "mcnemar_c\t" + std::to_string(m.c) + "\n";
  out += "mcnemar_statistic\t" + format_double(m.statistic) + "\n";
  out += std::string("mcnemar_exact\t") + (m.exact ? "1" : "0") + "\n";
  out += "mcnemar_p\t" + format_double(m.p) + "\n";
  emit(s, io, "compare.txt", out);
  finish(s, io);
  return s;
}

RunSummary run_gridsearch(const PipelineIO& io) {
  ojson cfg = load_config(io.config_path);
  check_keys(cfg,
             {"features", "columns", "group", "repeats", "folds", "threshold",
              "gbdt", "grid", "seed"},
             "gridsearch config");
  RunSummary s;
  s.command = "gridsearch";
  s.seed = master_seed(cfg, io);

  const FeatureTable table = load_feature_table(str_req(cfg, "features"));
  const std::vector<std::string> cols = restrict_columns(cfg, table);
  const GBDTConfig base = gbdt_from(cfg, s.seed, io.threads);
  const int repeats = int_or(cfg, "repeats", 5);
  const int folds = int_or(cfg, "folds", 5);
  const double threshold = num_or(cfg, "threshold", 0.5);

  std::vector<int> iters = {base.iterations};
  std::vector<int> depths = {base.depth};
  std::vector<double> rates = {base.learning_rate};
  if (cfg.contains("grid")) {
    const ojson& grid = cfg["grid"];
    if (!grid.is_object()) fail(ErrorCode::bad_config, "'grid' must be an object");
    check_keys(grid, {"iterations", "depth", "learning_rate"}, "grid block");
    auto axis = [&](const char* key, auto& out) {
      if (!grid.contains(key)) return;
      const ojson& v = grid[key];
      if (!v.is_array() || v.empty())
        fail(ErrorCode::bad_config,
             std::string("grid '") + key + "' must be a nonempty array");
      out.clear();
      for (const auto& x : v) {
        if (!x.is_number())
          fail(ErrorCode::bad_config, std::string("grid '") + key + "' must be numeric");
        out.push_back(x.get<typename std::decay_t<decltype(out)>::value_type>());
      }
    };
    axis("iterations", iters);
    axis("depth", depths);
    axis("learning_rate", rates);
  }

  CsvWriter w;
  w.cell("iterations");
  w.cell("depth");
  w.cell("learning_rate");
  w.cell("mean_auroc");
  w.cell("sd_auroc");
  w.end_row();

  GBDTConfig best = base;
  double best_auroc = -1.0, best_sd = 0.0;
  for (int it : iters)
    for (int depth : depths)
      for (double lr : rates) {
        GBDTConfig g = base;
        g.iterations = it;
        g.depth = depth;
        g.learning_rate = lr;
        validate_config(g);
        const MetricsReport rep =
            repeated_cv(table, g, folds, repeats, threshold, cols, io.threads);
        w.cell(double(it));
        w.cell(double(depth));
        w.cell(lr);
        w.cell(rep.mean.auroc);
        w.cell(rep.sd.auroc);
        w.end_row();
        s.items += 1;
        const bool wins =
            rep.mean.auroc > best_auroc ||
            (rep.mean.auroc == best_auroc &&
             (it < best.iterations ||
              (it == best.iterations &&
               (depth < best.depth ||
                (depth == best.depth && lr < best.learning_rate)))));
        if (wins) {
          best = g;
          best_auroc = rep.mean.auroc;
          best_sd = rep.sd.auroc;
        }
      }

  ojson bj;
  bj["best"] = "ctomics-gridsearch/1";
  bj["iterations"] = best.iterations;
  bj["learning_rate"] = best.learning_rate;
  bj["depth"] = best.depth;
  bj["l2_leaf_reg"] = best.l2_leaf_reg;
  bj["feature_subsample"] = best.feature_subsample;
  bj["border_count"] = best.border_count;
  bj["row_subsample"] = best.row_subsample;
  bj["auto_class_weights"] = best.auto_class_weights;
  bj["early_stopping"] = best.early_stopping;
  bj["seed"] = best.seed;
  bj["mean_auroc"] = best_auroc;
  bj["sd_auroc"] = best_sd;

  emit(s, io, "gridsearch.csv", w.text());
  emit(s, io, "best.json", bj.dump(2) + "\n");
  finish(s, io);
  return s;
}

RunSummary run_phantom(const PipelineIO& io) {
  ojson cfg = load_config(io.config_path);
  check_keys(cfg,
             {"n", "dims", "spacing", "heart_semi", "fat_thickness",
              "lesion_count", "lesion_radius", "lesion_hu", "fat_hu",
              "calcium_weight", "fat_weight", "clinical_weight", "prevalence",
              "seed"},
             "phantom config");
  RunSummary s;
  s.command = "phantom";
  s.seed = master_seed(cfg, io);

  const int n = int_or(cfg, "n", 0);
  if (n < 1) fail(ErrorCode::bad_config, "'n' must be at least 1");
  const std::array<double, 3> dims_d = arr3_or(cfg, "dims", {41, 41, 41});
  const std::array<double, 3> spacing = arr3_or(cfg, "spacing", {1, 1, 1});
  const std::array<double, 3> semi = arr3_or(cfg, "heart_semi", {12, 12, 12});
  const Range thickness = range_or(cfg, "fat_thickness", {2.0, 6.0});
  const Range lesion_count = range_or(cfg, "lesion_count", {0, 4});
  const Range lesion_radius = range_or(cfg, "lesion_radius", {1.3, 2.6});
  const Range lesion_hu = range_or(cfg, "lesion_hu", {150, 800});
  const Range fat_hu = range_or(cfg, "fat_hu", {-110, -70});
  const double w_ca = num_or(cfg, "calcium_weight", 1.0);
  const double w_fat = num_or(cfg, "fat_weight", 1.0);
  const double w_clin = num_or(cfg, "clinical_weight", 0.0);
  const double prevalence = num_or(cfg, "prevalence", 0.3);

  PhantomSpec proto;
  for (int a = 0; a < 3; ++a) {
    proto.geom.dims[a] = int(std::llround(dims_d[a]));
    proto.geom.spacing[a] = spacing[a];
    proto.center_mm[a] = proto.geom.origin[a] +
                         0.5 * (proto.geom.dims[a] - 1) * spacing[a];
    proto.heart_semi_mm[a] = semi[a];
  }
  const double min_semi = std::min({semi[0], semi[1], semi[2]});
  const double max_sp = std::max({spacing[0], spacing[1], spacing[2]});

  fs::create_directories(fs::path(io.out_dir) / "patients");

  const auto& clin_reg = clinical_registry();
  std::vector<std::string> pids(n);
  std::vector<std::vector<double>> clin(n);
  std::vector<double> agatston(n, 0.0), fat_ml(n, 0.0), clin_signal(n, 0.0);
  std::vector<int> lesion_counts(n, 0), cac(n, 0);
  std::vector<int64_t> fat_vox(n, 0);
  std::vector<uint8_t> ok(n, 0);
  std::vector<std::string> errs(n);

  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "p%04d", i);
    pids[i] = buf;
    Rng rng(derive_seed(s.seed, uint64_t(i)));
    try {
      PhantomSpec spec = proto;
      spec.seed = derive_seed(s.seed, uint64_t(i));
      spec.fat_thickness_mm = uniform_in(rng, thickness);
      const int16_t slab_hu = int16_t(uniform_int(rng, fat_hu));
      spec.fat_slab_hu = {slab_hu, slab_hu, slab_hu, slab_hu};

      const int want = uniform_int(rng, lesion_count);
      for (int l = 0; l < want; ++l) {
        double r = uniform_in(rng, lesion_radius);
        r = std::max(r, 1.05 * std::max(spacing[0], spacing[1]));
        bool placed = false;
        for (int trial = 0; trial < 60 && !placed; ++trial) {
          std::array<double, 3> c;
          double enorm = 0;
          for (int a = 0; a < 3; ++a) {
            const double off = semi[a] * 0.8 * (2.0 * rng.next_real() - 1.0);
            c[a] = proto.center_mm[a] + off;
            enorm += (off / semi[a]) * (off / semi[a]);
          }
          // keep the whole lesion inside the heart with a voxel of margin
          if (std::sqrt(enorm) + (r + max_sp) / min_semi > 0.97) continue;
          bool clear = true;
          for (const LesionSpec& other : spec.lesions) {
            double d2 = 0;
            for (int a = 0; a < 3; ++a)
              d2 += (c[a] - other.center_mm[a]) * (c[a] - other.center_mm[a]);
            const double min_gap = r + other.radius_mm + 2.5 * max_sp;
            if (d2 < min_gap * min_gap) {
              clear = false;
              break;
            }
          }
          if (!clear) continue;
          LesionSpec l2;
          l2.center_mm = c;
          l2.radius_mm = r;
          l2.hu = int16_t(uniform_int(rng, lesion_hu));
          spec.lesions.push_back(l2);
          placed = true;
        }
        // a crowded heart just yields fewer lesions
      }

      const PhantomOutput out = generate_phantom(spec);
      const std::string stem = (fs::path("patients") / pids[i]).string();
      save_volume(out.ct, join_out(io, stem + "_volume"));
      save_mask(out.heart, join_out(io, stem + "_heart"));
      save_mask(out.pericardium, join_out(io, stem + "_pericardium"));
      save_mask(out.territory, join_out(io, stem + "_territory"));

      clin[i].reserve(clin_reg.size());
      for (const RegistryEntry& e : clin_reg) clin[i].push_back(clinical_value(e, rng));
      agatston[i] = out.truth.total_agatston;
      cac[i] = out.truth.cac_category;
      fat_vox[i] = out.truth.fat_total;
      fat_ml[i] = double(out.truth.fat_total) * out.truth.voxel_volume_mm3 / 1000.0;
      lesion_counts[i] = int(out.truth.lesions.size());
      clin_signal[i] = clin[i][1];  // clin_age carries the clinical signal
      ok[i] = 1;
    } catch (const std::exception& e) {
      errs[i] = e.what();
    }
  }
  s.items = n;

  std::vector<int> kept;
  for (int i = 0; i < n; ++i) {
    if (ok[i])
      kept.push_back(i);
    else
      s.failures.push_back(pids[i] + ": " + errs[i]);
  }
  if (kept.empty()) fail(ErrorCode::empty_input, "no phantom generated");

  // label model over the kept cohort: standardized burdens through a logistic
  // link, intercept solved so the mean probability equals the prevalence
  std::vector<double> va, vf, vc;
  for (int i : kept) {
    va.push_back(agatston[i]);
    vf.push_back(fat_ml[i]);
    vc.push_back(clin_signal[i]);
  }
  const std::vector<double> za = zscores(va), zf = zscores(vf), zc = zscores(vc);
  std::vector<double> etas(kept.size());
  for (size_t j = 0; j < kept.size(); ++j)
    etas[j] = w_ca * za[j] + w_fat * zf[j] + w_clin * zc[j];
  const double intercept = solve_intercept(etas, prevalence);

  // label stream kept apart from the per-patient geometry streams
  Rng label_rng(derive_seed(s.seed, 999983));
  const char* positive[3] = {"4A", "4B", "5"};
  const char* negative[4] = {"0", "1", "2", "3"};
  std::vector<int> labels(kept.size(), 0);
  std::vector<std::string> rads(kept.size());
  for (size_t j = 0; j < kept.size(); ++j) {
    labels[j] = label_rng.next_real() < sigmoid(etas[j] + intercept) ? 1 : 0;
    rads[j] = labels[j] ? positive[label_rng.next_below(3)]
                        : negative[label_rng.next_below(4)];
  }

  CsvWriter manifest;
  manifest.cell("patient_id");
  manifest.cell("volume");
  manifest.cell("heart_mask");
  manifest.cell("pericardium_mask");
  manifest.cell("territory_mask");
  manifest.cell("cad_rads");
  for (const RegistryEntry& e : clin_reg) manifest.cell(e.name);
  manifest.end_row();

  CsvWriter truth;
  truth.cell("patient_id");
  truth.cell("label");
  truth.cell("cad_rads");
  truth.cell("total_agatston");
  truth.cell("cac_category");
  truth.cell("lesion_count");
  truth.cell("fat_voxels");
  truth.cell("fat_volume_ml");
  truth.end_row();

  for (size_t j = 0; j < kept.size(); ++j) {
    const int i = kept[j];
    const std::string stem = "patients/" + pids[i];
    manifest.cell(pids[i]);
    manifest.cell(stem + "_volume");
    manifest.cell(stem + "_heart");
    manifest.cell(stem + "_pericardium");
    manifest.cell(stem + "_territory");
    manifest.cell(rads[j]);
    for (double v : clin[i]) manifest.cell(v);
    manifest.end_row();

    truth.cell(pids[i]);
    truth.cell(double(labels[j]));
    truth.cell(rads[j]);
    truth.cell(agatston[i]);
    truth.cell(double(cac[i]));
    truth.cell(double(lesion_counts[i]));
    truth.cell(double(fat_vox[i]));
    truth.cell(fat_ml[i]);
    truth.end_row();
  }

  emit(s, io, "manifest.csv", manifest.text());
  emit(s, io, "truth.csv", truth.text());
  finish(s, io);
  return s;
}

}  // namespace ctomics
