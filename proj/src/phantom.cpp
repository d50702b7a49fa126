#include "ctomics/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "ctomics/calcium.hpp"
#include "ctomics/error.hpp"
#include "ctomics/fat.hpp"
#include "ctomics/gbdt.hpp"
#include "ctomics/rng.hpp"

namespace ctomics {

namespace {

constexpr double kSliceAreaFloor = 1.0;  // mm2, lesions below never register

void check_hu_range(int hu, const char* what) {
  if (hu < kHuMin || hu > kHuMax)
    fail(ErrorCode::bad_argument, std::string(what) + " HU outside the scan range");
}

bool in_fat_band(int hu) { return hu >= -190 && hu <= -30; }

// independent restatement of the slice weight rule
int slice_weight(int hu) {
  if (hu >= 400) return 4;
  if (hu >= 300) return 3;
  if (hu >= 200) return 2;
  if (hu >= 130) return 1;
  return 0;
}

int category_of(double agatston) {
  if (agatston == 0) return 0;
  if (agatston <= 100) return 1;
  if (agatston < 400) return 2;
  return 3;
}

void validate_spec(const PhantomSpec& spec) {
  for (int a = 0; a < 3; ++a) {
    if (spec.geom.dims[a] < 1) fail(ErrorCode::bad_argument, "phantom dims must be positive");
    if (!(spec.geom.spacing[a] > 0) || !std::isfinite(spec.geom.spacing[a]))
      fail(ErrorCode::bad_argument, "phantom spacing must be positive");
    if (!(spec.heart_semi_mm[a] > 0))
      fail(ErrorCode::bad_argument, "heart semi-axes must be positive");
  }
  if (!(spec.fat_thickness_mm >= 0) || !std::isfinite(spec.fat_thickness_mm))
    fail(ErrorCode::bad_argument, "fat shell thickness must be nonnegative");
  check_hu_range(spec.heart_hu, "heart");
  check_hu_range(spec.background_hu, "background");
  if (in_fat_band(spec.heart_hu) || spec.heart_hu >= kCalciumHuThreshold)
    fail(ErrorCode::bad_argument, "heart HU must sit below the calcium threshold and outside the fat band");
  if (spec.fat_mixture_hu.empty()) {
    for (int q = 0; q < 4; ++q)
      if (spec.fat_slab_enabled[q] && !in_fat_band(spec.fat_slab_hu[q]))
        fail(ErrorCode::bad_argument, "fat slab HU outside [-190,-30]");
  } else {
    if (spec.fat_mixture_hu.size() != spec.fat_mixture_weights.size())
      fail(ErrorCode::bad_argument, "fat mixture values and weights differ in length");
    for (int16_t hu : spec.fat_mixture_hu)
      if (!in_fat_band(hu)) fail(ErrorCode::bad_argument, "fat mixture HU outside [-190,-30]");
    for (double w : spec.fat_mixture_weights)
      if (!(w > 0) || !std::isfinite(w))
        fail(ErrorCode::bad_argument, "fat mixture weights must be positive");
  }
  for (const LesionSpec& l : spec.lesions) {
    check_hu_range(l.hu, "lesion");
    if (l.hu < kCalciumHuThreshold)
      fail(ErrorCode::bad_argument, "lesion HU below the calcium threshold");
    if (l.radius_mm < 0) fail(ErrorCode::bad_argument, "lesion radius must be nonnegative");
    if (l.radius_mm == 0)
      for (int a = 0; a < 3; ++a)
        if (!(l.box_mm[a] > 0))
          fail(ErrorCode::bad_argument, "box lesion needs positive extents");
    if (l.territory > 3)
      fail(ErrorCode::bad_argument, "lesion territory code out of range");
  }
}

struct VoxelBounds {
  int lo[3], hi[3];
};

VoxelBounds bounds_for(const Geometry& g, const std::array<double, 3>& center,
                       const std::array<double, 3>& half) {
  VoxelBounds b;
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = std::max(0, int(std::ceil((center[a] - half[a] - g.origin[a]) / g.spacing[a])));
    b.hi[a] = std::min(g.dims[a] - 1,
                       int(std::floor((center[a] + half[a] - g.origin[a]) / g.spacing[a])));
  }
  return b;
}

}  // namespace

PhantomOutput generate_phantom(const PhantomSpec& spec) {
  validate_spec(spec);
  const Geometry& g = spec.geom;
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  const size_t total = g.voxel_count();

  PhantomOutput out;
  out.ct.geom = g;
  out.ct.hu.assign(total, spec.background_hu);
  out.heart.geom = g;
  out.heart.labels.assign(total, 0);
  out.pericardium.geom = g;
  out.pericardium.labels.assign(total, 0);
  out.territory.geom = g;
  out.territory.labels.assign(total, 0);

  std::array<double, 3> outer_semi;
  for (int a = 0; a < 3; ++a) outer_semi[a] = spec.heart_semi_mm[a] + spec.fat_thickness_mm;

  int zmin_peri = nz, zmax_peri = -1;
  size_t idx = 0;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x, ++idx) {
        const auto p = g.center_mm(x, y, z);
        double qh = 0, qp = 0;
        for (int a = 0; a < 3; ++a) {
          const double dh = (p[a] - spec.center_mm[a]) / spec.heart_semi_mm[a];
          const double dp = (p[a] - spec.center_mm[a]) / outer_semi[a];
          qh += dh * dh;
          qp += dp * dp;
        }
        if (qp <= 1.0) {
          out.pericardium.labels[idx] = 1;
          zmin_peri = std::min(zmin_peri, z);
          zmax_peri = std::max(zmax_peri, z);
        }
        if (qh <= 1.0) {
          out.heart.labels[idx] = 1;
          out.ct.hu[idx] = spec.heart_hu;
          const int code = 1 + (p[0] >= spec.center_mm[0] ? 1 : 0) +
                           (p[1] >= spec.center_mm[1] ? 2 : 0);
          out.territory.labels[idx] = uint8_t(code);
        }
      }
  bool heart_any = false;
  for (uint8_t v : out.heart.labels) heart_any |= v != 0;
  if (!heart_any) fail(ErrorCode::bad_argument, "heart ellipsoid produces no voxels");

  // shell fill; the draw order is the linear voxel order, so seeded mixtures
  // are reproducible
  Rng rng(spec.seed);
  double weight_total = 0;
  for (double w : spec.fat_mixture_weights) weight_total += w;
  for (size_t i = 0; i < total; ++i) {
    if (!out.pericardium.labels[i] || out.heart.labels[i]) continue;
    if (!spec.fat_mixture_hu.empty()) {
      double u = rng.next_real() * weight_total;
      size_t pick = 0;
      while (pick + 1 < spec.fat_mixture_hu.size() && u >= spec.fat_mixture_weights[pick]) {
        u -= spec.fat_mixture_weights[pick];
        ++pick;
      }
      out.ct.hu[i] = spec.fat_mixture_hu[pick];
    } else {
      const int z = g.coords(i)[2];
      const int q = slab_of_z(z, zmin_peri, zmax_peri);
      out.ct.hu[i] = spec.fat_slab_enabled[q] ? spec.fat_slab_hu[q] : spec.heart_hu;
    }
  }

  // lesions painted after the shell; voxel lists come out index-ascending
  std::vector<std::vector<size_t>> lesion_voxels(spec.lesions.size());
  for (size_t li = 0; li < spec.lesions.size(); ++li) {
    const LesionSpec& l = spec.lesions[li];
    const bool sphere = l.radius_mm > 0;
    std::array<double, 3> half = sphere
        ? std::array<double, 3>{l.radius_mm, l.radius_mm, l.radius_mm}
        : std::array<double, 3>{l.box_mm[0] / 2, l.box_mm[1] / 2, l.box_mm[2] / 2};
    const VoxelBounds b = bounds_for(g, l.center_mm, half);
    for (int z = b.lo[2]; z <= b.hi[2]; ++z)
      for (int y = b.lo[1]; y <= b.hi[1]; ++y)
        for (int x = b.lo[0]; x <= b.hi[0]; ++x) {
          const auto p = g.center_mm(x, y, z);
          bool inside;
          if (sphere) {
            double q = 0;
            for (int a = 0; a < 3; ++a) {
              const double d = (p[a] - l.center_mm[a]) / l.radius_mm;
              q += d * d;
            }
            inside = q <= 1.0;
          } else {
            inside = true;
            for (int a = 0; a < 3; ++a)
              inside = inside && std::fabs(p[a] - l.center_mm[a]) <= half[a];
          }
          if (!inside) continue;
          const size_t vi = g.index(x, y, z);
          if (!out.heart.labels[vi])
            fail(ErrorCode::bad_argument,
                 "lesion " + std::to_string(li) + " reaches outside the heart mask");
          lesion_voxels[li].push_back(vi);
          out.ct.hu[vi] = l.hu;
        }
    if (lesion_voxels[li].empty())
      fail(ErrorCode::bad_argument, "lesion " + std::to_string(li) + " produces no voxels");
  }

  // the slice-area floor drops a component entirely, so reject specs whose
  // lesions would silently vanish from extraction
  const double pixel_area = g.spacing[0] * g.spacing[1];
  for (size_t li = 0; li < spec.lesions.size(); ++li) {
    std::vector<int> slice_count(nz, 0);
    for (size_t vi : lesion_voxels[li]) slice_count[g.coords(vi)[2]] += 1;
    double max_area = 0;
    for (int z = 0; z < nz; ++z)
      max_area = std::max(max_area, slice_count[z] * pixel_area);
    if (max_area < kSliceAreaFloor)
      fail(ErrorCode::bad_argument,
           "lesion " + std::to_string(li) + " never reaches the slice area floor");
  }

  if (spec.isolated && spec.lesions.size() > 1) {
    for (size_t a = 0; a < spec.lesions.size(); ++a)
      for (size_t b2 = a + 1; b2 < spec.lesions.size(); ++b2) {
        for (size_t va : lesion_voxels[a]) {
          const auto ca = g.coords(va);
          for (size_t vb : lesion_voxels[b2]) {
            const auto cb = g.coords(vb);
            const int gap = std::max({std::abs(ca[0] - cb[0]), std::abs(ca[1] - cb[1]),
                                      std::abs(ca[2] - cb[2])});
            if (gap < 2)
              fail(ErrorCode::bad_argument,
                   "lesions " + std::to_string(a) + " and " + std::to_string(b2) +
                       " are closer than the isolation gap");
          }
        }
      }
  }

  // ground truth by direct counting of what was just emitted
  GroundTruth& truth = out.truth;
  truth.voxel_volume_mm3 = g.voxel_volume_mm3();
  truth.notes = "counts taken from the emitted masks; counting features are exact";

  std::vector<size_t> order(spec.lesions.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return lesion_voxels[a].front() < lesion_voxels[b].front();
  });
  for (size_t oi = 0; oi < order.size(); ++oi) {
    const size_t li = order[oi];
    const std::vector<size_t>& vox = lesion_voxels[li];
    LesionTruth t;
    t.spec_index = int(li);
    t.voxel_count = int64_t(vox.size());
    t.volume_mm3 = double(vox.size()) * g.voxel_volume_mm3();

    double hu_sum = 0;
    t.hu_min = double(kHuMax);
    t.hu_max = double(kHuMin);
    int counts[5] = {};
    std::vector<int> slice_count(nz, 0);
    std::vector<int> slice_max(nz, kHuMin);
    for (size_t vi : vox) {
      const int hu = out.ct.hu[vi];
      hu_sum += hu;
      t.hu_min = std::min(t.hu_min, double(hu));
      t.hu_max = std::max(t.hu_max, double(hu));
      counts[out.territory.labels[vi]] += 1;
      const int z = g.coords(vi)[2];
      slice_count[z] += 1;
      slice_max[z] = std::max(slice_max[z], hu);
    }
    t.hu_mean = hu_sum / double(vox.size());

    int best = 0, best_n = 0;
    for (int code = 1; code <= 4; ++code)
      if (counts[code] > best_n) {
        best = code;
        best_n = counts[code];
      }
    t.territory = best - 1;
    if (spec.lesions[li].territory >= 0 && spec.lesions[li].territory != t.territory)
      fail(ErrorCode::bad_argument,
           "lesion " + std::to_string(li) + " lands in territory " +
               std::to_string(t.territory) + ", spec declares " +
               std::to_string(spec.lesions[li].territory));

    double slice_sum = 0;
    for (int z = 0; z < nz; ++z) {
      const double area = slice_count[z] * pixel_area;
      if (area < kSliceAreaFloor) continue;
      slice_sum += area * slice_weight(slice_max[z]);
    }
    t.agatston = (g.spacing[2] / 3.0) * slice_sum;
    truth.lesions.push_back(t);
  }
  // summed the same way the extractor folds territories into the heart total
  for (int code = 0; code < 4; ++code) {
    double sub = 0;
    for (const LesionTruth& t : truth.lesions)
      if (t.territory == code) sub += t.agatston;
    truth.total_agatston += sub;
  }
  truth.cac_category = category_of(truth.total_agatston);

  for (size_t i = 0; i < total; ++i) {
    if (!out.pericardium.labels[i]) continue;
    const int hu = out.ct.hu[i];
    if (!in_fat_band(hu)) continue;
    truth.fat_total += 1;
    const int band = std::min(7, (hu + 190) / 20);
    truth.fat_hist[band] += 1;
    const int q = slab_of_z(g.coords(i)[2], zmin_peri, zmax_peri);
    truth.fat_slab[q] += 1;
    truth.fat_slab_band[q][band] += 1;
  }
  return out;
}

double solve_intercept(const std::vector<double>& etas, double prevalence) {
  if (etas.empty()) fail(ErrorCode::empty_input, "no rows to balance");
  if (!(prevalence > 0.0 && prevalence < 1.0))
    fail(ErrorCode::bad_config, "prevalence must lie strictly inside (0,1)");
  auto frac = [&](double b) {
    double s = 0;
    for (double e : etas) s += sigmoid(e + b);
    return s / double(etas.size());
  };
  double lo = -60.0, hi = 60.0;
  if (frac(lo) > prevalence || frac(hi) < prevalence)
    fail(ErrorCode::bad_config, "prevalence unreachable for these logits");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (frac(mid) < prevalence ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

FeatureTable generate_cohort(const CohortSpec& spec) {
  if (spec.n_rows < 1) fail(ErrorCode::bad_config, "cohort needs at least one row");
  if (spec.n_features < 1) fail(ErrorCode::bad_config, "cohort needs at least one feature");
  if (spec.informative.size() != spec.coefficients.size())
    fail(ErrorCode::bad_config, "informative indices and coefficients differ in length");
  std::vector<int> seen;
  for (int j : spec.informative) {
    if (j < 0 || j >= spec.n_features)
      fail(ErrorCode::bad_config, "informative index out of range");
    if (std::find(seen.begin(), seen.end(), j) != seen.end())
      fail(ErrorCode::bad_config, "duplicate informative index");
    seen.push_back(j);
  }
  for (double c : spec.coefficients)
    if (!std::isfinite(c)) fail(ErrorCode::bad_config, "coefficients must be finite");
  if (!std::isfinite(spec.noise_mean) || !std::isfinite(spec.noise_sd) ||
      spec.noise_sd < 0)
    fail(ErrorCode::bad_config, "noise distribution must be finite with sd >= 0");
  if (!(spec.prevalence > 0.0 && spec.prevalence < 1.0))
    fail(ErrorCode::bad_config, "prevalence must lie strictly inside (0,1)");
  if (!spec.feature_names.empty()) {
    if (spec.feature_names.size() != size_t(spec.n_features))
      fail(ErrorCode::bad_config, "feature name list does not match n_features");
    std::vector<std::string> sorted = spec.feature_names;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front().empty() ||
        std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      fail(ErrorCode::bad_config, "feature names must be unique and nonempty");
  }

  FeatureTable t;
  if (spec.feature_names.empty()) {
    for (int j = 0; j < spec.n_features; ++j)
      t.feature_names.push_back("x" + std::to_string(j));
  } else {
    t.feature_names = spec.feature_names;
  }

  Rng rng(spec.seed);
  std::vector<double> etas(spec.n_rows, 0.0);
  for (int i = 0; i < spec.n_rows; ++i) {
    std::vector<double> row(spec.n_features);
    for (int j = 0; j < spec.n_features; ++j)
      row[j] = spec.noise_mean + spec.noise_sd * rng.next_normal();
    for (size_t k = 0; k < spec.informative.size(); ++k)
      etas[i] += spec.coefficients[k] * row[spec.informative[k]];
    t.patient_ids.push_back("p" + std::to_string(i));
    t.rows.push_back(std::move(row));
  }
  const double intercept = solve_intercept(etas, spec.prevalence);
  for (int i = 0; i < spec.n_rows; ++i)
    t.labels.push_back(rng.next_real() < sigmoid(etas[i] + intercept) ? 1 : 0);
  return t;
}

}  // namespace ctomics
