#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ctomics/volume.hpp"

namespace ctomics {

constexpr int16_t kCalciumHuThreshold = 130;
constexpr double kMinSliceAreaMm2 = 1.0;

// Per-slice density weight from the slice-max HU: 1 for [130,200), 2 for
// [200,300), 3 for [300,400), 4 above, 0 below threshold.
int agatston_weight(int hu);

// 0 absent, 1 mild (0,100], 2 moderate (100,400), 3 severe >= 400.
// Negative scores are rejected.
int cac_category(double agatston);

struct CalciumOptions {
  double mass_calib = 0.001;  // mgEq per mm3 per HU, pure scale
  int connectivity = 26;
};

struct LesionRecord {
  int id = 0;         // 1-based, ordered by minimum voxel linear index
  int territory = 0;  // 0..3 = lm/lad/lcx/rca
  std::vector<size_t> voxels;  // linear indices, ascending
  std::array<double, 3> centroid_mm{0, 0, 0};
  std::array<int64_t, 8> hist{};  // HU bins of width 100 from 130, last open

  double voxel_count = 0;
  double volume_mm3 = 0;
  double mass_mgeq = 0;
  double agatston = 0;
  double hu_min = 0;
  double hu_max = 0;
  double hu_mean = 0;
  double hu_variance = 0;
  double hu_skewness = 0;
  double hu_kurtosis = 0;
  double max_diameter_mm = 0;     // farthest surface-voxel-center pair
  double sphericity = 0;          // in (0,1] for voxel solids
  double elongation = 0;          // >= 1, major over middle axis
  double dist_next_lesion_mm = 0; // heart bbox diagonal when alone
  double dist_to_top_mm = 0;      // centroid to the superior-most slice plane

  double feature(int idx) const;  // lesion_feature_names() order
};

struct TerritorySummary {
  int lesion_count = 0;
  double agatston = 0;
  double volume_mm3 = 0;
  double mass_mgeq = 0;
  double hu_mean = 0;
  double hu_sd = 0;
  double hu_skewness = 0;
  double hu_kurtosis = 0;
  double diffusivity = 0;  // 0 empty, 1 single, else mean pairwise
                           // centroid distance over territory bbox diagonal
  std::array<int64_t, 8> hist{};
  // mean and max over member lesions of agatston, volume_mm3, mass_mgeq,
  // hu_mean, max_diameter_mm, dist_next_lesion_mm, dist_to_top_mm
  std::array<double, 7> member_mean{};
  std::array<double, 7> member_max{};
};

struct HeartCalciumSummary {
  int lesion_count = 0;
  double agatston = 0;  // sum over territories in code order
  double volume_mm3 = 0;
  double mass_mgeq = 0;
  double hu_mean = 0;
  double hu_sd = 0;
  double hu_skewness = 0;
  double hu_kurtosis = 0;
  std::array<int64_t, 8> hist{};
  int cac_category = 0;
  double diffusivity = 0;  // normalized by the heart bbox diagonal
  int territories_with_lesions = 0;
  double dominant_territory_share = 0;
};

struct CalciumResult {
  std::vector<LesionRecord> lesions;
  std::array<TerritorySummary, 4> territories;
  HeartCalciumSummary heart;
  std::vector<double> features;  // calcium_registry() order
};

CalciumResult extract_calcium(const Volume& ct, const MaskVolume& heart_mask,
                              const MaskVolume& territory_mask,
                              const CalciumOptions& opt = {});

}  // namespace ctomics
