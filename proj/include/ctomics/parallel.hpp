#pragma once

#include <omp.h>

namespace ctomics {

// Every parallel kernel takes an explicit thread count and writes results to
// index-addressed slots only, so output is bit-identical for any value here.
inline int clamp_threads(int requested) {
  if (requested <= 0) return 1;
  if (requested > 256) return 256;
  return requested;
}

}  // namespace ctomics
