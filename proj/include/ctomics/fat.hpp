#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ctomics/volume.hpp"

namespace ctomics {

constexpr int16_t kFatHuLo = -190;
constexpr int16_t kFatHuHi = -30;

// 20-HU band over [-190,-30], half-open except the last, -1 out of band.
int fat_band(int hu);

// Quarter of the occupied z range [zmin, zmax], 0 = inferior, 3 = superior.
int slab_of_z(int z, int zmin, int zmax);

// Fat voxel: inside the pericardium with HU in the band, endpoints included.
// An empty pericardium is rejected; an empty fat mask is a valid result.
MaskVolume segment_fat(const Volume& ct, const MaskVolume& pericardium);

struct SlabRibbonPartition {
  int zmin = 0, zmax = 0;        // pericardium z extent
  std::vector<int8_t> slab;      // per voxel, -1 outside the pericardium
  std::vector<int8_t> ribbon;    // quartile of normalized inward distance,
                                 // R1 (0) outermost, R4 (3) holds the core
};

// Slabs split the pericardium z extent; ribbons come from each slice's
// pericardium distance transform normalized by the slice maximum.
SlabRibbonPartition spatial_partition(const MaskVolume& pericardium,
                                      int threads = 1);

// Integer voxel ledgers; every conservation contract is exact on these.
struct FatCounts {
  int64_t total = 0;
  std::array<int64_t, 8> hist{};
  std::array<int64_t, 4> slab{};
  std::array<int64_t, 4> ribbon{};
  std::array<std::array<int64_t, 8>, 4> slab_band{};
  std::array<std::array<int64_t, 8>, 4> ribbon_band{};
  std::array<std::array<int64_t, 4>, 4> cell{};  // [slab][ribbon]
};

struct FatResult {
  MaskVolume fat;
  FatCounts counts;
  std::vector<double> features;  // fat_registry() order
};

FatResult extract_fat(const Volume& ct, const MaskVolume& pericardium,
                      int threads = 1);

}  // namespace ctomics
