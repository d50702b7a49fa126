#include "ctomics/fat.hpp"

#include <algorithm>
#include <cmath>

#include "ctomics/error.hpp"
#include "ctomics/geomstats.hpp"
#include "ctomics/registry.hpp"

namespace ctomics {

int fat_band(int hu) {
  if (hu < kFatHuLo || hu > kFatHuHi) return -1;
  return std::min(7, (hu - kFatHuLo) / 20);
}

int slab_of_z(int z, int zmin, int zmax) {
  return std::min(3, (z - zmin) * 4 / (zmax - zmin + 1));
}

MaskVolume segment_fat(const Volume& ct, const MaskVolume& pericardium) {
  require_same_geometry(ct.geom, pericardium.geom, "pericardium mask");
  require_binary_mask(pericardium, "pericardium mask");
  bool any = false;
  for (uint8_t v : pericardium.labels) any = any || v;
  if (!any) fail(ErrorCode::empty_input, "pericardium mask has no voxels");
  MaskVolume fat;
  fat.geom = ct.geom;
  fat.labels.assign(ct.geom.voxel_count(), 0);
  for (size_t i = 0; i < fat.labels.size(); ++i)
    fat.labels[i] = pericardium.labels[i] && fat_band(ct.hu[i]) >= 0;
  return fat;
}

SlabRibbonPartition spatial_partition(const MaskVolume& pericardium,
                                      int threads) {
  require_binary_mask(pericardium, "pericardium mask");
  const Geometry& g = pericardium.geom;
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  SlabRibbonPartition part;
  part.slab.assign(g.voxel_count(), -1);
  part.ribbon.assign(g.voxel_count(), -1);

  int zmin = -1, zmax = -1;
  for (int z = 0; z < nz; ++z) {
    bool any = false;
    size_t base = g.index(0, 0, z);
    for (size_t i = 0; i < size_t(nx) * size_t(ny); ++i)
      any = any || pericardium.labels[base + i];
    if (!any) continue;
    if (zmin < 0) zmin = z;
    zmax = z;
  }
  if (zmin < 0) fail(ErrorCode::empty_input, "pericardium mask has no voxels");
  part.zmin = zmin;
  part.zmax = zmax;

  std::vector<double> dt = distance_transform_slices(pericardium, threads);
  for (int z = zmin; z <= zmax; ++z) {
    size_t base = g.index(0, 0, z);
    double mx = 0;
    for (size_t i = 0; i < size_t(nx) * size_t(ny); ++i)
      mx = std::max(mx, dt[base + i]);
    if (mx == 0) continue;
    int8_t slab = int8_t(slab_of_z(z, zmin, zmax));
    for (size_t i = 0; i < size_t(nx) * size_t(ny); ++i) {
      if (!pericardium.labels[base + i]) continue;
      part.slab[base + i] = slab;
      part.ribbon[base + i] =
          int8_t(std::min(3, int(dt[base + i] / mx * 4.0)));
    }
  }
  return part;
}

namespace {

double entropy_bits(const int64_t* counts, int64_t total) {
  if (total <= 0) return 0;
  double h = 0;
  for (int b = 0; b < 8; ++b) {
    if (counts[b] == 0) continue;
    double p = double(counts[b]) / double(total);
    h -= p * std::log2(p);
  }
  return h;
}

struct HuPool {
  std::vector<double> values;

  void moments_into(std::vector<double>& out) const {
    Moments m = compute_moments(values);
    out.push_back(m.min);
    out.push_back(m.max);
    out.push_back(m.mean);
    out.push_back(m.sd);
    out.push_back(m.skewness);
    out.push_back(m.kurtosis);
  }
};

}  // namespace

FatResult extract_fat(const Volume& ct, const MaskVolume& pericardium,
                      int threads) {
  FatResult res;
  res.fat = segment_fat(ct, pericardium);
  SlabRibbonPartition part = spatial_partition(pericardium, threads);

  const Geometry& g = ct.geom;
  const double sx = g.spacing[0], sy = g.spacing[1], sz = g.spacing[2];
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  const double voxvol = g.voxel_volume_mm3();
  auto ml = [&](int64_t count) { return double(count) * voxvol / 1000.0; };

  FatCounts& C = res.counts;
  std::vector<size_t> fat_voxels;
  for (size_t i = 0; i < res.fat.labels.size(); ++i) {
    if (!res.fat.labels[i]) continue;
    fat_voxels.push_back(i);
    int band = fat_band(ct.hu[i]);
    int s = part.slab[i], r = part.ribbon[i];
    C.total += 1;
    C.hist[band] += 1;
    C.slab[s] += 1;
    C.ribbon[r] += 1;
    C.slab_band[s][band] += 1;
    C.ribbon_band[r][band] += 1;
    C.cell[s][r] += 1;
  }

  HuPool global;
  HuPool slab_pool[4], ribbon_pool[4], cell_pool[4][4];
  double slab_thick_sum[4] = {};
  double thick_sum = 0;
  double surface = 0;
  double axes[3] = {0, 0, 0};
  double elongation = 0, sphericity = 0;
  double thickness_mean = 0;

  if (C.total > 0) {
    std::vector<double> dt3 = distance_transform_3d(res.fat, threads);

    double cx = 0, cy = 0, cz = 0;
    for (size_t idx : fat_voxels) {
      auto c = g.coords(idx);
      double hu = double(ct.hu[idx]);
      int s = part.slab[idx], r = part.ribbon[idx];
      global.values.push_back(hu);
      slab_pool[s].values.push_back(hu);
      ribbon_pool[r].values.push_back(hu);
      cell_pool[s][r].values.push_back(hu);
      thick_sum += dt3[idx];
      slab_thick_sum[s] += dt3[idx];
      auto p = g.center_mm(c[0], c[1], c[2]);
      cx += p[0];
      cy += p[1];
      cz += p[2];

      static const int dirs[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                     {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
      const double face_area[3] = {sy * sz, sx * sz, sx * sy};
      for (const auto& d : dirs) {
        int x = c[0] + d[0], y = c[1] + d[1], z = c[2] + d[2];
        bool in = x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz &&
                  res.fat.labels[g.index(x, y, z)];
        if (!in)
          surface += face_area[std::abs(d[0]) ? 0 : (std::abs(d[1]) ? 1 : 2)];
      }
    }
    double n = double(C.total);
    double centroid[3] = {cx / n, cy / n, cz / n};
    double cov[3][3] = {};
    for (size_t idx : fat_voxels) {
      auto c = g.coords(idx);
      auto p = g.center_mm(c[0], c[1], c[2]);
      double d[3] = {p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]};
      for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) cov[a][b] += d[a] * d[b];
    }
    std::array<std::array<double, 3>, 3> m{};
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) m[a][b] = m[b][a] = cov[a][b] / n;
    auto ev = eig3_descending(m);
    for (int a = 0; a < 3; ++a) axes[a] = 4.0 * std::sqrt(std::max(0.0, ev[a]));
    if (ev[1] > 0) elongation = std::sqrt(ev[0] / ev[1]);
    const double kPi = 3.14159265358979323846;
    double vol_mm3 = double(C.total) * voxvol;
    sphericity = std::cbrt(kPi) * std::pow(6.0 * vol_mm3, 2.0 / 3.0) / surface;
    thickness_mean = 2.0 * thick_sum / n;
  }

  std::vector<double>& F = res.features;
  F.reserve(fat_registry().size());
  F.push_back(ml(C.total));
  F.push_back(axes[0]);
  F.push_back(axes[1]);
  F.push_back(axes[2]);
  F.push_back(thickness_mean);
  F.push_back(surface);
  F.push_back(sphericity);
  F.push_back(elongation);
  global.moments_into(F);
  F.push_back(entropy_bits(C.hist.data(), C.total));
  for (int b = 0; b < 8; ++b) F.push_back(double(C.hist[b]));

  for (int s = 0; s < 4; ++s) {
    F.push_back(ml(C.slab[s]));
    F.push_back(C.total > 0 ? double(C.slab[s]) / double(C.total) : 0.0);
    slab_pool[s].moments_into(F);
    F.push_back(entropy_bits(C.slab_band[s].data(), C.slab[s]));
    F.push_back(C.slab[s] > 0 ? 2.0 * slab_thick_sum[s] / double(C.slab[s])
                              : 0.0);
    for (int b = 0; b < 8; ++b) F.push_back(ml(C.slab_band[s][b]));
  }
  for (int r = 0; r < 4; ++r) {
    F.push_back(ml(C.ribbon[r]));
    F.push_back(C.total > 0 ? double(C.ribbon[r]) / double(C.total) : 0.0);
    ribbon_pool[r].moments_into(F);
    F.push_back(entropy_bits(C.ribbon_band[r].data(), C.ribbon[r]));
    for (int b = 0; b < 8; ++b) F.push_back(ml(C.ribbon_band[r][b]));
  }
  for (int s = 0; s < 4; ++s)
    for (int r = 0; r < 4; ++r) {
      F.push_back(ml(C.cell[s][r]));
      Moments m = compute_moments(cell_pool[s][r].values);
      F.push_back(m.mean);
      F.push_back(m.sd);
    }

  if (F.size() != fat_registry().size())
    fail(ErrorCode::arity_mismatch, "fat feature vector length drifted");
  return res;
}

}  // namespace ctomics
