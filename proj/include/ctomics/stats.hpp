#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace ctomics {

struct DeLongResult {
  double auc_a = 0.0, auc_b = 0.0;
  double variance = 0.0;  // estimated var(auc_a - auc_b)
  double z = 0.0;
  double p = 1.0;
};

// paired AUROC comparison via placement-value covariances
DeLongResult delong_test(const std::vector<double>& scores_a,
                         const std::vector<double>& scores_b,
                         const std::vector<int>& labels);

struct McNemarResult {
  int64_t b = 0;  // a correct, b wrong
  int64_t c = 0;  // a wrong, b correct
  double statistic = 0.0;  // continuity-corrected chi-square, 0 when b+c = 0
  bool exact = false;      // true when the binomial branch produced p
  double p = 1.0;
};

McNemarResult mcnemar_test(const std::vector<int>& preds_a,
                           const std::vector<int>& preds_b,
                           const std::vector<int>& labels);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

WelchResult welch_ttest(const std::vector<double>& x, const std::vector<double>& y);

struct Chi2Result {
  double chi2 = 0.0;
  double p = 1.0;
};

// Pearson chi-square on a 2x2 table, no continuity correction, 1 df
Chi2Result chi2_test(const std::array<std::array<int64_t, 2>, 2>& counts);

// building blocks, exposed for tests
double normal_sf(double z);                               // P(Z > z)
double regularized_incbeta(double a, double b, double x); // I_x(a, b)
double student_sf(double t, double df);                   // P(T > t), t >= 0

}  // namespace ctomics
