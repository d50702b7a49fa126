// Times the OpenMP kernels against their serial twins and checks that both
// produce identical bytes, since every parallel path promises bitwise
// equality with the serial one.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ctomics/eval.hpp"
#include "ctomics/gbdt.hpp"
#include "ctomics/rng.hpp"
#include "ctomics/shap.hpp"
#include "ctomics/volume.hpp"

using namespace ctomics;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds(clock_type::time_point a, clock_type::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

MaskVolume ellipsoid_mask(int n) {
  MaskVolume m;
  m.geom.dims = {n, n, n};
  m.geom.spacing = {0.7, 0.7, 1.1};
  m.labels.assign(m.geom.voxel_count(), 0);
  const double c = (n - 1) / 2.0;
  size_t idx = 0;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x, ++idx) {
        const double dx = (x - c) / (0.42 * n), dy = (y - c) / (0.34 * n),
                     dz = (z - c) / (0.45 * n);
        m.labels[idx] = dx * dx + dy * dy + dz * dz <= 1.0 ? 1 : 0;
      }
  return m;
}

FeatureTable random_table(int rows, int cols, uint64_t seed) {
  FeatureTable t;
  Rng rng(seed);
  for (int j = 0; j < cols; ++j) t.feature_names.push_back("f" + std::to_string(j));
  for (int i = 0; i < rows; ++i) {
    std::vector<double> row(cols);
    double sig = 0;
    for (int j = 0; j < cols; ++j) {
      row[j] = rng.next_normal();
      if (j < 3) sig += row[j];
    }
    t.patient_ids.push_back("r" + std::to_string(i));
    t.labels.push_back(sig + 0.5 * rng.next_normal() > 0 ? 1 : 0);
    t.rows.push_back(std::move(row));
  }
  return t;
}

void report(const char* name, double serial_s, double parallel_s, bool equal) {
  std::printf("%-28s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n", name,
              serial_s, parallel_s, serial_s / parallel_s,
              equal ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel benchmark"};
  int threads = 8;
  int size = 160;
  app.add_option("--threads", threads, "parallel thread count")
      ->check(CLI::PositiveNumber);
  app.add_option("--size", size, "mask edge length in voxels")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  int failures = 0;

  {
    const MaskVolume mask = ellipsoid_mask(size);
    auto t0 = clock_type::now();
    const auto serial = distance_transform_slices_serial(mask);
    auto t1 = clock_type::now();
    const auto parallel = distance_transform_slices(mask, threads);
    auto t2 = clock_type::now();
    const bool equal = serial == parallel;
    failures += equal ? 0 : 1;
    report("distance_transform_slices", seconds(t0, t1), seconds(t1, t2), equal);

    auto t3 = clock_type::now();
    const auto serial3 = distance_transform_3d_serial(mask);
    auto t4 = clock_type::now();
    const auto parallel3 = distance_transform_3d(mask, threads);
    auto t5 = clock_type::now();
    const bool equal3 = serial3 == parallel3;
    failures += equal3 ? 0 : 1;
    report("distance_transform_3d", seconds(t3, t4), seconds(t4, t5), equal3);
  }

  {
    const FeatureTable table = random_table(4000, 24, 7);
    GBDTConfig cfg;
    cfg.iterations = 120;
    cfg.learning_rate = 0.1;
    cfg.early_stopping = false;
    cfg.seed = 7;

    cfg.threads = 1;
    auto t0 = clock_type::now();
    const Model serial_model = fit(table, nullptr, cfg);
    auto t1 = clock_type::now();
    cfg.threads = threads;
    const Model parallel_model = fit(table, nullptr, cfg);
    auto t2 = clock_type::now();
    const bool equal = serialize(serial_model) == serialize(parallel_model);
    failures += equal ? 0 : 1;
    report("gbdt_fit", seconds(t0, t1), seconds(t1, t2), equal);

    auto t3 = clock_type::now();
    const auto shap_serial = tree_shap_batch(serial_model, table, 1);
    auto t4 = clock_type::now();
    const auto shap_parallel = tree_shap_batch(serial_model, table, threads);
    auto t5 = clock_type::now();
    bool shap_equal = shap_serial.size() == shap_parallel.size();
    for (size_t i = 0; shap_equal && i < shap_serial.size(); ++i)
      shap_equal = shap_serial[i].values == shap_parallel[i].values &&
                   shap_serial[i].base_value == shap_parallel[i].base_value;
    failures += shap_equal ? 0 : 1;
    report("tree_shap_batch", seconds(t3, t4), seconds(t4, t5), shap_equal);
  }

  {
    const FeatureTable table = random_table(700, 16, 11);
    GBDTConfig cfg;
    cfg.iterations = 60;
    cfg.learning_rate = 0.1;
    cfg.seed = 11;
    cfg.threads = 1;
    auto t0 = clock_type::now();
    const MetricsReport serial = repeated_cv(table, cfg, 5, 6, 0.5, {}, 1);
    auto t1 = clock_type::now();
    const MetricsReport parallel = repeated_cv(table, cfg, 5, 6, 0.5, {}, threads);
    auto t2 = clock_type::now();
    const bool equal =
        metrics_report_text(serial) == metrics_report_text(parallel);
    failures += equal ? 0 : 1;
    report("repeated_cv", seconds(t0, t1), seconds(t1, t2), equal);
  }

  if (failures > 0) {
    std::fprintf(stderr, "%d kernel(s) diverged from the serial reference\n",
                 failures);
    return 1;
  }
  return 0;
}
