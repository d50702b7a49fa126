#include <doctest.h>

#include <cmath>

#include "ctomics/fat.hpp"
#include "ctomics/registry.hpp"
#include "ctomics/rng.hpp"

#include "helpers.hpp"

using namespace ctomics;

namespace {

size_t fat_index(const std::string& name) {
  const auto& reg = fat_registry();
  for (size_t i = 0; i < reg.size(); ++i)
    if (reg[i].name == name) return i;
  FAIL("unknown fat feature " << name);
  return 0;
}

}  // namespace

TEST_SUITE("fat") {

TEST_CASE("band boundaries are inclusive at both ends") {
  CHECK(fat_band(-191) == -1);
  CHECK(fat_band(-190) == 0);
  CHECK(fat_band(-171) == 0);
  CHECK(fat_band(-170) == 1);
  CHECK(fat_band(-51) == 6);
  CHECK(fat_band(-50) == 7);
  CHECK(fat_band(-31) == 7);
  CHECK(fat_band(-30) == 7);
  CHECK(fat_band(-29) == -1);
  CHECK(fat_band(0) == -1);
  CHECK(fat_band(130) == -1);
}

TEST_CASE("slab quarters over the occupied z range") {
  // eight slices split 2-2-2-2, superior quarter is slices 6..7
  for (int z : {0, 1}) CHECK(slab_of_z(z, 0, 7) == 0);
  for (int z : {2, 3}) CHECK(slab_of_z(z, 0, 7) == 1);
  for (int z : {4, 5}) CHECK(slab_of_z(z, 0, 7) == 2);
  for (int z : {6, 7}) CHECK(slab_of_z(z, 0, 7) == 3);
  // offset ranges follow the occupied extent, not absolute z
  CHECK(slab_of_z(3, 3, 10) == 0);
  CHECK(slab_of_z(10, 3, 10) == 3);
  // single-slice pericardium collapses to the inferior slab
  CHECK(slab_of_z(5, 5, 5) == 0);
}

TEST_CASE("fat segmentation honors the band and the pericardium") {
  auto ct = make_volume({6, 6, 2}, {1, 1, 1}, -100);
  auto peri = make_mask({6, 6, 2}, {1, 1, 1}, 1);
  auto fat = segment_fat(ct, peri);
  CHECK(fat.labels == peri.labels);

  auto ct0 = make_volume({6, 6, 2}, {1, 1, 1}, 0);
  auto none = segment_fat(ct0, peri);
  for (uint8_t v : none.labels) CHECK(v == 0);

  // boundary HU values, one voxel each
  auto ctb = make_volume({4, 1, 1}, {1, 1, 1}, 0);
  ctb.hu = {-191, -190, -30, -29};
  auto fatb = segment_fat(ctb, make_mask({4, 1, 1}, {1, 1, 1}, 1));
  CHECK(fatb.labels[0] == 0);
  CHECK(fatb.labels[1] == 1);
  CHECK(fatb.labels[2] == 1);
  CHECK(fatb.labels[3] == 0);

  expect_error(ErrorCode::empty_input, [&] {
    segment_fat(ct, make_mask({6, 6, 2}, {1, 1, 1}, 0));
  });
  expect_error(ErrorCode::geometry_mismatch, [&] {
    segment_fat(ct, make_mask({6, 6, 3}, {1, 1, 1}, 1));
  });
}

TEST_CASE("cube morphology by hand") {
  auto ct = make_volume({12, 12, 12}, {1, 1, 1}, 0);
  auto peri = make_mask({12, 12, 12}, {1, 1, 1}, 0);
  for (int z = 1; z <= 10; ++z)
    for (int y = 1; y <= 10; ++y)
      for (int x = 1; x <= 10; ++x) {
        ct.hu[ct.geom.index(x, y, z)] = -100;
        peri.labels[ct.geom.index(x, y, z)] = 1;
      }
  auto r = extract_fat(ct, peri);
  CHECK(r.counts.total == 1000);
  CHECK(r.features[fat_index("fat_volume_ml")] == 1.0);
  CHECK(r.features[fat_index("fat_surface_area_mm2")] == 600.0);
  double want_axis = 4.0 * std::sqrt(99.0 / 12.0);
  CHECK(r.features[fat_index("fat_axis_major_mm")] ==
        doctest::Approx(want_axis));
  CHECK(r.features[fat_index("fat_axis_middle_mm")] ==
        doctest::Approx(want_axis));
  CHECK(r.features[fat_index("fat_axis_minor_mm")] ==
        doctest::Approx(want_axis));
  CHECK(r.features[fat_index("fat_elongation")] == doctest::Approx(1.0));
  CHECK(r.features[fat_index("fat_hu_mean")] == -100.0);
  CHECK(r.features[fat_index("fat_hu_sd")] == 0.0);
  CHECK(r.features[fat_index("fat_hu_entropy_bits")] == 0.0);
  CHECK(r.features[fat_index("fat_hist_110_90")] == 1000.0);
  CHECK(r.features[fat_index("fat_thickness_mean_mm")] > 0);
}

TEST_CASE("entropy hand values") {
  // half at -170, half at -50: one bit
  auto ct = make_volume({4, 4, 1}, {1, 1, 1}, 0);
  auto peri = make_mask({4, 4, 1}, {1, 1, 1}, 1);
  for (size_t i = 0; i < ct.hu.size(); ++i)
    ct.hu[i] = (i % 2 == 0) ? int16_t(-170) : int16_t(-50);
  auto r = extract_fat(ct, peri);
  CHECK(r.features[fat_index("fat_hu_entropy_bits")] == 1.0);

  // two voxels in each of the eight bands: maximal three bits
  auto ct8 = make_volume({8, 2, 1}, {1, 1, 1}, 0);
  auto peri8 = make_mask({8, 2, 1}, {1, 1, 1}, 1);
  for (size_t i = 0; i < ct8.hu.size(); ++i) {
    int x = ct8.geom.coords(i)[0];
    ct8.hu[i] = int16_t(-180 + 20 * x);
  }
  auto r8 = extract_fat(ct8, peri8);
  CHECK(r8.features[fat_index("fat_hu_entropy_bits")] == 3.0);
  for (int b = 0; b < 8; ++b) CHECK(r8.counts.hist[b] == 2);
}

TEST_CASE("uniform HU shift moves the mean and nothing else") {
  auto build = [](int16_t shift) {
    auto ct = make_volume({4, 4, 2}, {1, 1, 1}, 0);
    auto peri = make_mask({4, 4, 2}, {1, 1, 1}, 0);
    const int16_t hus[8] = {-170, -150, -130, -110, -90, -170, -150, -130};
    int k = 0;
    for (int y = 1; y <= 2; ++y)
      for (int x = 1; x <= 2; ++x)
        for (int z = 0; z < 2; ++z) {
          size_t i = ct.geom.index(x, y, z);
          peri.labels[i] = 1;
          ct.hu[i] = int16_t(hus[k++ % 8] + shift);
        }
    return extract_fat(ct, peri);
  };
  auto a = build(0);
  auto b = build(10);
  CHECK(b.features[fat_index("fat_hu_mean")] ==
        a.features[fat_index("fat_hu_mean")] + 10.0);
  for (const char* name : {"fat_hu_sd", "fat_hu_skewness", "fat_hu_kurtosis",
                           "fat_volume_ml", "fat_surface_area_mm2"})
    CHECK(b.features[fat_index(name)] == a.features[fat_index(name)]);
}

TEST_CASE("ribbons of a solid square slice") {
  auto ct = make_volume({9, 9, 1}, {1, 1, 1}, -100);
  auto peri = make_mask({9, 9, 1}, {1, 1, 1}, 1);
  auto part = spatial_partition(peri);
  CHECK(part.zmin == 0);
  CHECK(part.zmax == 0);
  // center voxel is 5 mm from the nearest outside center: the unique maximum
  CHECK(part.ribbon[peri.geom.index(4, 4, 0)] == 3);
  CHECK(part.ribbon[peri.geom.index(0, 0, 0)] == 0);
  CHECK(part.ribbon[peri.geom.index(4, 0, 0)] == 0);
  auto r = extract_fat(ct, peri);
  CHECK(r.counts.ribbon[0] == 32);
  CHECK(r.counts.ribbon[1] == 24);
  CHECK(r.counts.ribbon[2] == 16);
  CHECK(r.counts.ribbon[3] == 9);
  CHECK(r.counts.slab[0] == 81);
}

TEST_CASE("superior-quarter fat lands in the PQ4 bands") {
  auto ct = make_volume({6, 6, 8}, {1, 1, 3}, 0);
  auto peri = make_mask({6, 6, 8}, {1, 1, 3}, 1);
  for (int z : {6, 7})
    for (int y = 2; y <= 3; ++y)
      for (int x = 2; x <= 3; ++x)
        ct.hu[ct.geom.index(x, y, z)] = -60;
  auto r = extract_fat(ct, peri);
  CHECK(r.counts.total == 8);
  CHECK(r.counts.slab[3] == 8);
  double total_ml = r.features[fat_index("fat_volume_ml")];
  CHECK(total_ml == 8 * 3.0 / 1000.0);
  CHECK(r.features[fat_index("fat_PQ4_Vol_70_50")] == total_ml);
  CHECK(r.features[fat_index("fat_PQ4_Vol_50_30")] == 0.0);
  CHECK(r.features[fat_index("fat_q4_volume_fraction")] == 1.0);
  for (int q = 1; q <= 3; ++q)
    for (const char* band : {"190_170", "70_50", "50_30"})
      CHECK(r.features[fat_index("fat_PQ" + std::to_string(q) + "_Vol_" +
                                 band)] == 0.0);
}

TEST_CASE("edits outside the pericardium change nothing") {
  auto ct = make_volume({10, 10, 4}, {1, 1, 1.5}, -60);
  auto peri = make_mask({10, 10, 4}, {1, 1, 1.5}, 0);
  for (int z = 1; z <= 2; ++z)
    for (int y = 2; y <= 7; ++y)
      for (int x = 2; x <= 7; ++x)
        peri.labels[peri.geom.index(x, y, z)] = 1;
  auto base = extract_fat(ct, peri);
  Rng rng(5);
  auto noisy = ct;
  for (size_t i = 0; i < noisy.hu.size(); ++i)
    if (!peri.labels[i]) noisy.hu[i] = int16_t(int(rng.next_below(3000)) - 1000);
  auto pert = extract_fat(noisy, peri);
  for (size_t i = 0; i < base.features.size(); ++i)
    CHECK(base.features[i] == pert.features[i]);
}

TEST_CASE("x reflection leaves every feature unchanged") {
  const int nx = 8, ny = 8, nz = 4;
  auto build = [&](bool flip) {
    auto ct = make_volume({nx, ny, nz}, {1, 1, 0.75}, 0);
    auto peri = make_mask({nx, ny, nz}, {1, 1, 0.75}, 0);
    auto put = [&](int x, int y, int z) {
      int xx = flip ? nx - 1 - x : x;
      peri.labels[peri.geom.index(xx, y, z)] = 1;
      ct.hu[ct.geom.index(xx, y, z)] = -60;
    };
    for (int z = 1; z <= 2; ++z) {
      for (int y = 1; y <= 2; ++y)
        for (int x = 1; x <= 4; ++x) put(x, y, z);
      for (int y = 3; y <= 6; ++y)
        for (int x = 1; x <= 2; ++x) put(x, y, z);
    }
    return extract_fat(ct, peri);
  };
  auto a = build(false);
  auto b = build(true);
  CHECK(a.counts.total == 32);
  REQUIRE(a.features.size() == b.features.size());
  for (size_t i = 0; i < a.features.size(); ++i) {
    INFO("feature ", fat_registry()[i].name);
    CHECK(a.features[i] == b.features[i]);
  }
  // the L shape is one voxel thick in z, so local thickness is constant
  CHECK(a.features[fat_index("fat_thickness_mean_mm")] == 1.5);
}

TEST_CASE("no fat at all yields an all-zero vector") {
  auto ct = make_volume({6, 6, 3}, {1, 1, 1}, 50);
  auto peri = make_mask({6, 6, 3}, {1, 1, 1}, 1);
  auto r = extract_fat(ct, peri);
  CHECK(r.counts.total == 0);
  REQUIRE(r.features.size() == fat_registry().size());
  for (double v : r.features) CHECK(v == 0.0);
}

TEST_CASE("integer conservation on random scenes") {
  Rng rng(314159);
  for (int trial = 0; trial < 20; ++trial) {
    const double sxs[3] = {0.25, 0.5, 1.0};
    const double szs[3] = {0.75, 1.5, 3.0};
    std::array<int, 3> dims = {int(8 + rng.next_below(10)),
                               int(8 + rng.next_below(10)),
                               int(4 + rng.next_below(6))};
    auto ct = make_volume(dims, {sxs[rng.next_below(3)], sxs[rng.next_below(3)],
                                 szs[rng.next_below(3)]});
    auto peri = make_mask(dims, ct.geom.spacing, 0);
    // random pericardium box with random HU inside, junk outside
    int x0 = int(rng.next_below(3)), y0 = int(rng.next_below(3)),
        z0 = int(rng.next_below(2));
    int x1 = dims[0] - 1 - int(rng.next_below(3));
    int y1 = dims[1] - 1 - int(rng.next_below(3));
    int z1 = dims[2] - 1 - int(rng.next_below(2));
    for (size_t i = 0; i < ct.hu.size(); ++i) {
      auto c = ct.geom.coords(i);
      bool in = c[0] >= x0 && c[0] <= x1 && c[1] >= y0 && c[1] <= y1 &&
                c[2] >= z0 && c[2] <= z1;
      peri.labels[i] = in ? 1 : 0;
      ct.hu[i] = int16_t(int(rng.next_below(400)) - 250);  // [-250, 149]
    }
    auto r = extract_fat(ct, peri);
    const FatCounts& C = r.counts;
    int64_t slab_sum = 0, ribbon_sum = 0, hist_sum = 0, band_sum = 0,
            cell_sum = 0;
    for (int s = 0; s < 4; ++s) {
      slab_sum += C.slab[s];
      int64_t row = 0;
      for (int b = 0; b < 8; ++b) row += C.slab_band[s][b];
      CHECK(row == C.slab[s]);
      band_sum += row;
      for (int rb = 0; rb < 4; ++rb) cell_sum += C.cell[s][rb];
    }
    for (int rb = 0; rb < 4; ++rb) {
      ribbon_sum += C.ribbon[rb];
      int64_t row = 0;
      for (int b = 0; b < 8; ++b) row += C.ribbon_band[rb][b];
      CHECK(row == C.ribbon[rb]);
    }
    for (int b = 0; b < 8; ++b) hist_sum += C.hist[b];
    CHECK(slab_sum == C.total);
    CHECK(ribbon_sum == C.total);
    CHECK(hist_sum == C.total);
    CHECK(band_sum == C.total);
    CHECK(cell_sum == C.total);

    // every fat voxel is inside the pericardium and in band
    int64_t recount = 0;
    for (size_t i = 0; i < r.fat.labels.size(); ++i) {
      if (!r.fat.labels[i]) continue;
      recount += 1;
      CHECK(peri.labels[i] == 1);
      CHECK(fat_band(ct.hu[i]) >= 0);
    }
    CHECK(recount == C.total);

    double voxvol = ct.geom.voxel_volume_mm3();
    CHECK(r.features[fat_index("fat_volume_ml")] ==
          double(C.total) * voxvol / 1000.0);
    CHECK(r.features[fat_index("fat_q2_volume_ml")] ==
          double(C.slab[1]) * voxvol / 1000.0);
    CHECK(r.features[fat_index("fat_r1_volume_ml")] ==
          double(C.ribbon[0]) * voxvol / 1000.0);
    CHECK(r.features[fat_index("fat_q3r2_volume_ml")] ==
          double(C.cell[2][1]) * voxvol / 1000.0);
    CHECK(r.features[fat_index("fat_PQ1_Vol_190_170")] ==
          double(C.slab_band[0][0]) * voxvol / 1000.0);
    if (C.total > 0) {
      CHECK(r.features[fat_index("fat_sphericity")] > 0);
      CHECK(r.features[fat_index("fat_hu_min")] >= -190);
      CHECK(r.features[fat_index("fat_hu_max")] <= -30);
      double ent = r.features[fat_index("fat_hu_entropy_bits")];
      CHECK(ent >= 0);
      CHECK(ent <= 3.0 + 1e-12);
    }
  }
}

TEST_CASE("threads do not change the result") {
  auto ct = make_volume({14, 12, 6}, {0.5, 0.5, 1.5}, -80);
  auto peri = make_mask({14, 12, 6}, {0.5, 0.5, 1.5}, 0);
  for (int z = 1; z <= 4; ++z)
    for (int y = 1; y <= 10; ++y)
      for (int x = 1; x <= 12; ++x)
        peri.labels[peri.geom.index(x, y, z)] = 1;
  auto one = extract_fat(ct, peri, 1);
  auto many = extract_fat(ct, peri, 8);
  for (size_t i = 0; i < one.features.size(); ++i)
    CHECK(one.features[i] == many.features[i]);
}

}  // TEST_SUITE
