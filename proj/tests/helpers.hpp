#pragma once

#include <doctest.h>

#include <filesystem>
#include <string>

#include "ctomics/error.hpp"
#include "ctomics/volume.hpp"

inline ctomics::Volume make_volume(std::array<int, 3> dims,
                                   std::array<double, 3> spacing,
                                   int16_t fill = 0) {
  ctomics::Volume v;
  v.geom.dims = dims;
  v.geom.spacing = spacing;
  v.hu.assign(v.geom.voxel_count(), fill);
  return v;
}

inline ctomics::MaskVolume make_mask(std::array<int, 3> dims,
                                     std::array<double, 3> spacing,
                                     uint8_t fill = 0) {
  ctomics::MaskVolume m;
  m.geom.dims = dims;
  m.geom.spacing = spacing;
  m.labels.assign(m.geom.voxel_count(), fill);
  return m;
}

// Fresh scratch directory per test; wiped on entry so reruns are clean.
inline std::filesystem::path test_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("ctomics_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

template <class Fn>
void expect_error(ctomics::ErrorCode code, Fn&& fn) {
  try {
    fn();
    FAIL_CHECK("expected error " << ctomics::to_string(code) << ", none thrown");
  } catch (const ctomics::Error& e) {
    CHECK(e.code() == code);
  }
}
