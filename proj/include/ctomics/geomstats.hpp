#pragma once

#include <array>
#include <vector>

namespace ctomics {

// Population moments. Zero variance pins skewness and kurtosis to 0;
// kurtosis is m4/m2^2 (normal = 3). Empty input leaves every field 0.
struct Moments {
  size_t n = 0;
  double mean = 0;
  double variance = 0;
  double sd = 0;
  double skewness = 0;
  double kurtosis = 0;
  double min = 0;
  double max = 0;
};

Moments compute_moments(const std::vector<double>& values);

// Eigenvalues of a symmetric 3x3 matrix, descending. Cyclic Jacobi sweeps.
std::array<double, 3> eig3_descending(std::array<std::array<double, 3>, 3> m);

}  // namespace ctomics
