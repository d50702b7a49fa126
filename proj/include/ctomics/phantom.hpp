#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ctomics/feature_table.hpp"
#include "ctomics/volume.hpp"

namespace ctomics {

struct LesionSpec {
  std::array<double, 3> center_mm{0, 0, 0};
  double radius_mm = 0.0;              // sphere when > 0
  std::array<double, 3> box_mm{0, 0, 0};  // full extents, used when radius == 0
  int16_t hu = 300;     // must reach the calcium threshold
  int territory = -1;   // expected 0..3 code, validated when >= 0
};

// Heart = filled inner ellipsoid, pericardium = heart grown by the fat shell
// thickness, territories = axial quadrants around the center. The shell takes
// the fat HU spec: one constant per z slab, or a seeded per-voxel mixture.
struct PhantomSpec {
  Geometry geom;
  std::array<double, 3> center_mm{0, 0, 0};
  std::array<double, 3> heart_semi_mm{20, 20, 20};
  double fat_thickness_mm = 4.0;  // 0 = no shell, no fat
  std::array<int16_t, 4> fat_slab_hu{-60, -60, -60, -60};
  std::array<bool, 4> fat_slab_enabled{true, true, true, true};  // off = filler
  std::vector<int16_t> fat_mixture_hu;      // when nonempty, overrides slabs
  std::vector<double> fat_mixture_weights;  // same length, positive
  int16_t heart_hu = 40;       // also fills disabled shell slabs
  int16_t background_hu = 0;
  std::vector<LesionSpec> lesions;
  bool isolated = true;  // enforce a >= 2 voxel gap between lesions
  uint64_t seed = 0;
};

struct LesionTruth {
  int spec_index = 0;  // position in PhantomSpec::lesions
  int territory = 0;   // 0..3, plurality of coded voxels
  int64_t voxel_count = 0;
  double volume_mm3 = 0;
  double hu_min = 0, hu_max = 0, hu_mean = 0;
  double agatston = 0;
};

// Everything counted directly from the emitted volume and masks, so the
// counting features carry no voxelization tolerance at all.
struct GroundTruth {
  std::vector<LesionTruth> lesions;  // ordered by minimum linear voxel index
  double total_agatston = 0;         // summed territory-by-territory
  int cac_category = 0;
  int64_t fat_total = 0;
  std::array<int64_t, 8> fat_hist{};
  std::array<int64_t, 4> fat_slab{};
  std::array<std::array<int64_t, 8>, 4> fat_slab_band{};
  double voxel_volume_mm3 = 0;
  std::string notes;
};

struct PhantomOutput {
  Volume ct;
  MaskVolume heart;
  MaskVolume pericardium;
  MaskVolume territory;
  GroundTruth truth;
};

PhantomOutput generate_phantom(const PhantomSpec& spec);

struct CohortSpec {
  int n_rows = 0;
  int n_features = 0;
  std::vector<int> informative;      // unique feature indices
  std::vector<double> coefficients;  // one per informative index
  double noise_mean = 0.0;
  double noise_sd = 1.0;
  double prevalence = 0.5;
  uint64_t seed = 0;
  std::vector<std::string> feature_names;  // x0..x{M-1} when empty
};

// Features drawn from the noise distribution; labels Bernoulli with
// logit = sum(coefficients * features) + intercept fitted to the target
// prevalence on the realized draws.
FeatureTable generate_cohort(const CohortSpec& spec);

// Bisection for mean(sigmoid(eta + b)) = prevalence.
double solve_intercept(const std::vector<double>& etas, double prevalence);

}  // namespace ctomics
