#include "ctomics/calcium.hpp"

#include <algorithm>
#include <cmath>

#include "ctomics/error.hpp"
#include "ctomics/geomstats.hpp"
#include "ctomics/registry.hpp"

namespace ctomics {

int agatston_weight(int hu) {
  if (hu < 130) return 0;
  if (hu < 200) return 1;
  if (hu < 300) return 2;
  if (hu < 400) return 3;
  return 4;
}

int cac_category(double agatston) {
  if (agatston < 0) fail(ErrorCode::bad_argument, "negative agatston score");
  if (agatston == 0) return 0;
  if (agatston <= 100) return 1;
  if (agatston < 400) return 2;
  return 3;
}

double LesionRecord::feature(int idx) const {
  switch (idx) {
    case 0: return voxel_count;
    case 1: return volume_mm3;
    case 2: return mass_mgeq;
    case 3: return agatston;
    case 4: return hu_min;
    case 5: return hu_max;
    case 6: return hu_mean;
    case 7: return hu_variance;
    case 8: return hu_skewness;
    case 9: return hu_kurtosis;
    case 10: return max_diameter_mm;
    case 11: return sphericity;
    case 12: return elongation;
    case 13: return dist_next_lesion_mm;
    case 14: return dist_to_top_mm;
  }
  fail(ErrorCode::bad_argument, "lesion feature index out of range");
}

namespace {

struct Bbox {
  bool any = false;
  int lo[3] = {0, 0, 0};
  int hi[3] = {0, 0, 0};

  void add(const std::array<int, 3>& c) {
    if (!any) {
      for (int a = 0; a < 3; ++a) lo[a] = hi[a] = c[a];
      any = true;
      return;
    }
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }

  // diagonal across voxel centers, mm
  double diagonal(const Geometry& g) const {
    if (!any) return 0;
    double s = 0;
    for (int a = 0; a < 3; ++a) {
      double e = (hi[a] - lo[a]) * g.spacing[a];
      s += e * e;
    }
    return std::sqrt(s);
  }
};

double dist3(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

int hu_bin(int hu) { return std::min(7, (hu - 130) / 100); }

// the 7 per-lesion features territory blocks summarize, by feature index
const int kMemberIdx[7] = {3, 1, 2, 6, 10, 13, 14};

}  // namespace

CalciumResult extract_calcium(const Volume& ct, const MaskVolume& heart_mask,
                              const MaskVolume& territory_mask,
                              const CalciumOptions& opt) {
  require_same_geometry(ct.geom, heart_mask.geom, "heart mask");
  require_same_geometry(ct.geom, territory_mask.geom, "territory mask");
  require_binary_mask(heart_mask, "heart mask");
  require_territory_mask(territory_mask);
  if (!(opt.mass_calib > 0))
    fail(ErrorCode::bad_config, "mass calibration must be positive");

  const Geometry& g = ct.geom;
  const double sx = g.spacing[0], sy = g.spacing[1], sz = g.spacing[2];
  const double pixel_area = sx * sy;
  const double voxvol = g.voxel_volume_mm3();
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];

  MaskVolume cand;
  cand.geom = g;
  cand.labels.assign(g.voxel_count(), 0);
  for (size_t i = 0; i < cand.labels.size(); ++i)
    cand.labels[i] = heart_mask.labels[i] && ct.hu[i] >= kCalciumHuThreshold;
  ComponentSet comps = connected_components(cand, opt.connectivity);

  CalciumResult res;
  for (const Component& comp : comps.components) {
    std::vector<int> slice_count(nz, 0);
    std::vector<int> slice_max(nz, kHuMin);
    for (size_t idx : comp.voxels) {
      auto c = g.coords(idx);
      slice_count[c[2]] += 1;
      slice_max[c[2]] = std::max(slice_max[c[2]], int(ct.hu[idx]));
    }
    double max_area = 0;
    for (int z = 0; z < nz; ++z)
      max_area = std::max(max_area, slice_count[z] * pixel_area);
    if (max_area < kMinSliceAreaMm2) continue;

    LesionRecord L;
    L.id = int(res.lesions.size()) + 1;
    L.voxels = comp.voxels;
    L.voxel_count = double(comp.voxels.size());
    L.volume_mm3 = L.voxel_count * voxvol;

    std::vector<double> hus;
    hus.reserve(comp.voxels.size());
    double cx = 0, cy = 0, cz = 0;
    for (size_t idx : comp.voxels) {
      int hu = ct.hu[idx];
      hus.push_back(double(hu));
      L.hist[hu_bin(hu)] += 1;
      auto p = g.center_mm(g.coords(idx)[0], g.coords(idx)[1], g.coords(idx)[2]);
      cx += p[0];
      cy += p[1];
      cz += p[2];
    }
    double n = L.voxel_count;
    L.centroid_mm = {cx / n, cy / n, cz / n};
    Moments hu_m = compute_moments(hus);
    L.hu_min = hu_m.min;
    L.hu_max = hu_m.max;
    L.hu_mean = hu_m.mean;
    L.hu_variance = hu_m.variance;
    L.hu_skewness = hu_m.skewness;
    L.hu_kurtosis = hu_m.kurtosis;
    L.mass_mgeq = L.volume_mm3 * L.hu_mean * opt.mass_calib;

    double slice_sum = 0;
    for (int z = 0; z < nz; ++z) {
      double area = slice_count[z] * pixel_area;
      if (area < kMinSliceAreaMm2) continue;
      slice_sum += area * agatston_weight(slice_max[z]);
    }
    L.agatston = (sz / 3.0) * slice_sum;

    // covariance of voxel centers plus the single-voxel box moment, so the
    // matrix stays positive definite and axes follow spacing anisotropy
    double cov[3][3] = {};
    for (size_t idx : comp.voxels) {
      auto c = g.coords(idx);
      auto p = g.center_mm(c[0], c[1], c[2]);
      double d[3] = {p[0] - L.centroid_mm[0], p[1] - L.centroid_mm[1],
                     p[2] - L.centroid_mm[2]};
      for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) cov[a][b] += d[a] * d[b];
    }
    std::array<std::array<double, 3>, 3> m{};
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b)
        m[a][b] = m[b][a] =
            cov[a][b] / n + (a == b ? g.spacing[a] * g.spacing[a] / 12.0 : 0.0);
    auto ev = eig3_descending(m);
    L.elongation = std::sqrt(ev[0] / ev[1]);

    double area_sum = 0;
    std::vector<size_t> surface;
    const double face_area[3] = {sy * sz, sx * sz, sx * sy};
    for (size_t idx : comp.voxels) {
      auto c = g.coords(idx);
      bool exposed = false;
      static const int dirs[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                     {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
      for (const auto& d : dirs) {
        int x = c[0] + d[0], y = c[1] + d[1], z = c[2] + d[2];
        bool inside = x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 &&
                      z < nz &&
                      comps.label_map[g.index(x, y, z)] == comp.id;
        if (!inside) {
          exposed = true;
          area_sum += face_area[std::abs(d[0]) ? 0 : (std::abs(d[1]) ? 1 : 2)];
        }
      }
      if (exposed) surface.push_back(idx);
    }
    const double kPi = 3.14159265358979323846;
    L.sphericity =
        std::cbrt(kPi) * std::pow(6.0 * L.volume_mm3, 2.0 / 3.0) / area_sum;
    double best2 = 0;
    for (size_t i = 0; i < surface.size(); ++i) {
      auto ci = g.coords(surface[i]);
      auto pi = g.center_mm(ci[0], ci[1], ci[2]);
      for (size_t j = i + 1; j < surface.size(); ++j) {
        auto cj = g.coords(surface[j]);
        auto pj = g.center_mm(cj[0], cj[1], cj[2]);
        double dx = pi[0] - pj[0], dy = pi[1] - pj[1], dz = pi[2] - pj[2];
        best2 = std::max(best2, dx * dx + dy * dy + dz * dz);
      }
    }
    L.max_diameter_mm = std::sqrt(best2);

    res.lesions.push_back(std::move(L));
  }

  // territory by plurality of coded voxels; an uncoded lesion takes the code
  // of the nearest coded voxel (tie toward the lower linear index)
  std::vector<size_t> coded;
  bool coded_built = false;
  for (LesionRecord& L : res.lesions) {
    int counts[5] = {};
    for (size_t idx : L.voxels) counts[territory_mask.labels[idx]] += 1;
    int best = 0, best_n = 0;
    for (int code = 1; code <= 4; ++code)
      if (counts[code] > best_n) {
        best = code;
        best_n = counts[code];
      }
    if (best == 0) {
      if (!coded_built) {
        for (size_t i = 0; i < territory_mask.labels.size(); ++i)
          if (territory_mask.labels[i] != 0) coded.push_back(i);
        coded_built = true;
      }
      if (coded.empty())
        fail(ErrorCode::bad_mask_labels,
             "territory mask holds no coded voxels to assign a lesion");
      double best_d = 0;
      for (size_t i = 0; i < coded.size(); ++i) {
        auto c = g.coords(coded[i]);
        double d = dist3(L.centroid_mm, g.center_mm(c[0], c[1], c[2]));
        if (i == 0 || d < best_d) {
          best_d = d;
          best = territory_mask.labels[coded[i]];
        }
      }
    }
    L.territory = best - 1;
  }

  Bbox heart_box;
  if (!res.lesions.empty()) {
    for (size_t i = 0; i < heart_mask.labels.size(); ++i)
      if (heart_mask.labels[i]) heart_box.add(g.coords(i));
  }
  const double top_z = g.origin[2] + (nz - 1) * sz;
  for (LesionRecord& L : res.lesions) {
    L.dist_to_top_mm = top_z - L.centroid_mm[2];
    if (res.lesions.size() == 1) {
      L.dist_next_lesion_mm = heart_box.diagonal(g);
    } else {
      double best = -1;
      for (const LesionRecord& other : res.lesions) {
        if (other.id == L.id) continue;
        double d = dist3(L.centroid_mm, other.centroid_mm);
        if (best < 0 || d < best) best = d;
      }
      L.dist_next_lesion_mm = best;
    }
  }

  Bbox terr_box[4];
  for (size_t i = 0; i < territory_mask.labels.size(); ++i)
    if (territory_mask.labels[i])
      terr_box[territory_mask.labels[i] - 1].add(g.coords(i));

  for (int t = 0; t < 4; ++t) {
    TerritorySummary& T = res.territories[t];
    std::vector<const LesionRecord*> members;
    for (const LesionRecord& L : res.lesions)
      if (L.territory == t) members.push_back(&L);
    T.lesion_count = int(members.size());
    if (members.empty()) continue;

    std::vector<double> hus;
    for (const LesionRecord* L : members) {
      T.agatston += L->agatston;
      T.volume_mm3 += L->volume_mm3;
      T.mass_mgeq += L->mass_mgeq;
      for (int b = 0; b < 8; ++b) T.hist[b] += L->hist[b];
      for (size_t idx : L->voxels) hus.push_back(double(ct.hu[idx]));
    }
    Moments hu_m = compute_moments(hus);
    T.hu_mean = hu_m.mean;
    T.hu_sd = hu_m.sd;
    T.hu_skewness = hu_m.skewness;
    T.hu_kurtosis = hu_m.kurtosis;

    if (members.size() == 1) {
      T.diffusivity = 1;
    } else {
      double diag = terr_box[t].diagonal(g);
      if (diag > 0) {
        double sum = 0;
        size_t pairs = 0;
        for (size_t i = 0; i < members.size(); ++i)
          for (size_t j = i + 1; j < members.size(); ++j) {
            sum += dist3(members[i]->centroid_mm, members[j]->centroid_mm);
            pairs += 1;
          }
        T.diffusivity = sum / double(pairs) / diag;
      }
    }

    for (int f = 0; f < 7; ++f) {
      double sum = 0, mx = members[0]->feature(kMemberIdx[f]);
      for (const LesionRecord* L : members) {
        double v = L->feature(kMemberIdx[f]);
        sum += v;
        mx = std::max(mx, v);
      }
      T.member_mean[f] = sum / double(members.size());
      T.member_max[f] = mx;
    }
  }

  HeartCalciumSummary& H = res.heart;
  H.lesion_count = int(res.lesions.size());
  for (int t = 0; t < 4; ++t) {
    H.agatston += res.territories[t].agatston;
    H.volume_mm3 += res.territories[t].volume_mm3;
    H.mass_mgeq += res.territories[t].mass_mgeq;
    for (int b = 0; b < 8; ++b) H.hist[b] += res.territories[t].hist[b];
    if (res.territories[t].lesion_count > 0) H.territories_with_lesions += 1;
  }
  {
    std::vector<double> hus;
    for (const LesionRecord& L : res.lesions)
      for (size_t idx : L.voxels) hus.push_back(double(ct.hu[idx]));
    Moments hu_m = compute_moments(hus);
    H.hu_mean = hu_m.mean;
    H.hu_sd = hu_m.sd;
    H.hu_skewness = hu_m.skewness;
    H.hu_kurtosis = hu_m.kurtosis;
  }
  H.cac_category = cac_category(H.agatston);
  if (H.lesion_count == 1) {
    H.diffusivity = 1;
  } else if (H.lesion_count >= 2) {
    double diag = heart_box.diagonal(g);
    if (diag > 0) {
      double sum = 0;
      size_t pairs = 0;
      for (size_t i = 0; i < res.lesions.size(); ++i)
        for (size_t j = i + 1; j < res.lesions.size(); ++j) {
          sum += dist3(res.lesions[i].centroid_mm, res.lesions[j].centroid_mm);
          pairs += 1;
        }
      H.diffusivity = sum / double(pairs) / diag;
    }
  }
  if (H.lesion_count > 0) {
    int mx = 0;
    for (int t = 0; t < 4; ++t)
      mx = std::max(mx, res.territories[t].lesion_count);
    H.dominant_territory_share = double(mx) / double(H.lesion_count);
  }

  std::vector<double>& F = res.features;
  F.reserve(calcium_registry().size());
  F.push_back(double(H.lesion_count));
  for (int f = 0; f < 15; ++f) {
    std::vector<double> vals;
    vals.reserve(res.lesions.size());
    for (const LesionRecord& L : res.lesions) vals.push_back(L.feature(f));
    Moments m = compute_moments(vals);
    F.push_back(m.mean);
    F.push_back(m.max);
    F.push_back(m.sd);
  }
  for (int t = 0; t < 4; ++t) {
    const TerritorySummary& T = res.territories[t];
    F.push_back(double(T.lesion_count));
    F.push_back(T.agatston);
    F.push_back(T.volume_mm3);
    F.push_back(T.mass_mgeq);
    F.push_back(T.hu_mean);
    F.push_back(T.hu_sd);
    F.push_back(T.hu_skewness);
    F.push_back(T.hu_kurtosis);
    F.push_back(T.diffusivity);
    for (int b = 0; b < 8; ++b) F.push_back(double(T.hist[b]));
    for (int f = 0; f < 7; ++f) {
      F.push_back(T.member_mean[f]);
      F.push_back(T.member_max[f]);
    }
  }
  F.push_back(H.agatston);
  F.push_back(H.volume_mm3);
  F.push_back(H.mass_mgeq);
  F.push_back(H.hu_mean);
  F.push_back(H.hu_sd);
  F.push_back(H.hu_skewness);
  F.push_back(H.hu_kurtosis);
  for (int b = 0; b < 8; ++b) F.push_back(double(H.hist[b]));
  F.push_back(double(H.cac_category));
  F.push_back(H.diffusivity);
  F.push_back(double(H.territories_with_lesions));
  F.push_back(H.dominant_territory_share);

  if (F.size() != calcium_registry().size())
    fail(ErrorCode::arity_mismatch, "calcium feature vector length drifted");
  return res;
}

}  // namespace ctomics
