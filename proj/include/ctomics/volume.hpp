#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ctomics/error.hpp"

namespace ctomics {

// Axis-aligned scan geometry. Voxel (x,y,z) center sits at
// origin + (x,y,z) * spacing; storage is x-fastest, then y, then z.
struct Geometry {
  std::array<int, 3> dims{0, 0, 0};        // nx, ny, nz
  std::array<double, 3> spacing{1, 1, 1};  // mm, per-volume uniform
  std::array<double, 3> origin{0, 0, 0};   // mm, center of voxel (0,0,0)

  size_t voxel_count() const {
    return size_t(dims[0]) * size_t(dims[1]) * size_t(dims[2]);
  }
  size_t index(int x, int y, int z) const {
    return size_t(x) + size_t(dims[0]) * (size_t(y) + size_t(dims[1]) * size_t(z));
  }
  std::array<int, 3> coords(size_t idx) const {
    int nx = dims[0], ny = dims[1];
    int x = int(idx % size_t(nx));
    int y = int((idx / size_t(nx)) % size_t(ny));
    int z = int(idx / (size_t(nx) * size_t(ny)));
    return {x, y, z};
  }
  std::array<double, 3> center_mm(int x, int y, int z) const {
    return {origin[0] + x * spacing[0], origin[1] + y * spacing[1],
            origin[2] + z * spacing[2]};
  }
  double voxel_volume_mm3() const { return spacing[0] * spacing[1] * spacing[2]; }
};

// Exact comparison by header decimal strings, not float tolerance.
bool geometry_equal(const Geometry& a, const Geometry& b);
void require_same_geometry(const Geometry& a, const Geometry& b, const char* what);

constexpr int16_t kHuMin = -1024;
constexpr int16_t kHuMax = 4095;

struct Volume {
  Geometry geom;
  std::vector<int16_t> hu;  // x-fastest

  int16_t at(int x, int y, int z) const { return hu[geom.index(x, y, z)]; }
};

struct MaskVolume {
  Geometry geom;
  std::vector<uint8_t> labels;  // x-fastest

  uint8_t at(int x, int y, int z) const { return labels[geom.index(x, y, z)]; }
};

// Label-set checks used by the extractors before touching a mask.
void require_binary_mask(const MaskVolume& m, const char* what);
void require_territory_mask(const MaskVolume& m);  // codes 0..4

// File pair <name>.json + <name>.raw; path may be given with or without the
// .json suffix. Loads clamp HU into [-1024, 4095]; saves are atomic.
Volume load_volume(const std::string& path);
void save_volume(const Volume& v, const std::string& path);
MaskVolume load_mask(const std::string& path);
void save_mask(const MaskVolume& m, const std::string& path);

struct Component {
  int id = 0;                  // 1-based, ordered by minimum voxel linear index
  std::vector<size_t> voxels;  // linear indices, ascending
};

struct ComponentSet {
  std::vector<int32_t> label_map;  // 0 = background, else component id
  std::vector<Component> components;
};

// connectivity: 6 (faces), 18 (faces+edges) or 26 (full neighborhood)
ComponentSet connected_components(const MaskVolume& mask, int connectivity);

// Exact Euclidean distance (mm) from each inside voxel center to the nearest
// outside voxel center; voxels beyond the grid count as outside. Outside
// voxels carry 0.
std::vector<double> distance_transform_2d(const uint8_t* inside, int nx, int ny,
                                          double sx, double sy);

// Per-axial-slice 2D transform over a whole mask, and the 3D transform to the
// mask complement. Both have serial reference twins used by tests/bench.
std::vector<double> distance_transform_slices(const MaskVolume& mask, int threads);
std::vector<double> distance_transform_slices_serial(const MaskVolume& mask);
std::vector<double> distance_transform_3d(const MaskVolume& mask, int threads);
std::vector<double> distance_transform_3d_serial(const MaskVolume& mask);

}  // namespace ctomics
