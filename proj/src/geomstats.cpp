#include "ctomics/geomstats.hpp"

#include <algorithm>
#include <cmath>

namespace ctomics {

Moments compute_moments(const std::vector<double>& values) {
  Moments m;
  m.n = values.size();
  if (values.empty()) return m;
  m.min = values[0];
  m.max = values[0];
  double sum = 0;
  for (double x : values) {
    sum += x;
    m.min = std::min(m.min, x);
    m.max = std::max(m.max, x);
  }
  double n = double(values.size());
  m.mean = sum / n;
  double s2 = 0, s3 = 0, s4 = 0;
  for (double x : values) {
    double d = x - m.mean, d2 = d * d;
    s2 += d2;
    s3 += d2 * d;
    s4 += d2 * d2;
  }
  m.variance = s2 / n;
  m.sd = std::sqrt(m.variance);
  if (m.variance > 0) {
    double m2 = m.variance, m3 = s3 / n, m4 = s4 / n;
    m.skewness = m3 / (m2 * m.sd);
    m.kurtosis = m4 / (m2 * m2);
  }
  return m;
}

std::array<double, 3> eig3_descending(std::array<std::array<double, 3>, 3> a) {
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
    double scale =
        std::abs(a[0][0]) + std::abs(a[1][1]) + std::abs(a[2][2]) + off;
    if (off == 0 || off <= 1e-15 * scale) break;
    static const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (const auto& pq : pairs) {
      int p = pq[0], q = pq[1];
      double apq = a[p][q];
      if (apq == 0) continue;
      double theta = (a[q][q] - a[p][p]) / (2 * apq);
      double t = (theta >= 0 ? 1.0 : -1.0) /
                 (std::abs(theta) + std::sqrt(theta * theta + 1));
      double c = 1 / std::sqrt(t * t + 1), s = t * c;
      double app = a[p][p], aqq = a[q][q];
      a[p][p] = app - t * apq;
      a[q][q] = aqq + t * apq;
      a[p][q] = a[q][p] = 0;
      int r = 3 - p - q;
      double arp = a[r][p], arq = a[r][q];
      a[r][p] = a[p][r] = c * arp - s * arq;
      a[r][q] = a[q][r] = s * arp + c * arq;
    }
  }
  std::array<double, 3> ev{a[0][0], a[1][1], a[2][2]};
  std::sort(ev.begin(), ev.end(), std::greater<double>());
  return ev;
}

}  // namespace ctomics
