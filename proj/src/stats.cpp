#include "ctomics/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctomics/error.hpp"

namespace ctomics {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

namespace {

// continued fraction for the incomplete beta (Lentz)
double betacf(double a, double b, double x) {
  const int maxit = 300;
  const double eps = 3e-14, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= maxit; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

double two_sided_normal_p(double z) {
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

double chi2_sf_1df(double x) { return std::erfc(std::sqrt(0.5 * x)); }

}  // namespace

double regularized_incbeta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) fail(ErrorCode::bad_argument, "incbeta needs a,b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
              b * std::log1p(-x);
  double front = std::exp(ln);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_sf(double t, double df) {
  if (!(df > 0.0)) fail(ErrorCode::bad_argument, "student_sf needs df > 0");
  if (t < 0.0) return 1.0 - student_sf(-t, df);
  if (std::isinf(t)) return 0.0;
  double x = df / (df + t * t);
  return 0.5 * regularized_incbeta(0.5 * df, 0.5, x);
}

DeLongResult delong_test(const std::vector<double>& scores_a,
                         const std::vector<double>& scores_b,
                         const std::vector<int>& labels) {
  const size_t n = labels.size();
  if (scores_a.size() != n || scores_b.size() != n)
    fail(ErrorCode::arity_mismatch, "paired scores must match the labels in length");
  std::vector<size_t> pos, neg;
  for (size_t i = 0; i < n; ++i) (labels[i] ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    fail(ErrorCode::single_class, "delong needs both classes");
  const size_t m = pos.size(), q = neg.size();

  auto placements = [&](const std::vector<double>& s, std::vector<double>& v10,
                        std::vector<double>& v01) {
    v10.assign(m, 0.0);
    v01.assign(q, 0.0);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < q; ++j) {
        double psi = s[pos[i]] > s[neg[j]] ? 1.0 : (s[pos[i]] == s[neg[j]] ? 0.5 : 0.0);
        v10[i] += psi;
        v01[j] += psi;
      }
    for (double& v : v10) v /= static_cast<double>(q);
    for (double& v : v01) v /= static_cast<double>(m);
  };
  std::vector<double> v10a, v01a, v10b, v01b;
  placements(scores_a, v10a, v01a);
  placements(scores_b, v10b, v01b);

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  DeLongResult r;
  r.auc_a = mean(v10a);
  r.auc_b = mean(v10b);

  auto cov = [](const std::vector<double>& x, double mx, const std::vector<double>& y,
                double my) {
    if (x.size() < 2) return 0.0;
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
    return s / static_cast<double>(x.size() - 1);
  };
  double s10aa = cov(v10a, r.auc_a, v10a, r.auc_a);
  double s10bb = cov(v10b, r.auc_b, v10b, r.auc_b);
  double s10ab = cov(v10a, r.auc_a, v10b, r.auc_b);
  double s01aa = cov(v01a, r.auc_a, v01a, r.auc_a);
  double s01bb = cov(v01b, r.auc_b, v01b, r.auc_b);
  double s01ab = cov(v01a, r.auc_a, v01b, r.auc_b);
  r.variance = (s10aa + s10bb - 2.0 * s10ab) / static_cast<double>(m) +
               (s01aa + s01bb - 2.0 * s01ab) / static_cast<double>(q);

  const double delta = r.auc_a - r.auc_b;
  if (r.variance <= 0.0) {
    if (delta == 0.0) {
      r.z = 0.0;
      r.p = 1.0;
    } else {
      r.z = std::copysign(std::numeric_limits<double>::infinity(), delta);
      r.p = 0.0;
    }
    return r;
  }
  r.z = delta / std::sqrt(r.variance);
  r.p = two_sided_normal_p(r.z);
  return r;
}

McNemarResult mcnemar_test(const std::vector<int>& preds_a, const std::vector<int>& preds_b,
                           const std::vector<int>& labels) {
  const size_t n = labels.size();
  if (preds_a.size() != n || preds_b.size() != n)
    fail(ErrorCode::arity_mismatch, "paired predictions must match the labels in length");
  McNemarResult r;
  for (size_t i = 0; i < n; ++i) {
    bool a_ok = preds_a[i] == labels[i];
    bool b_ok = preds_b[i] == labels[i];
    if (a_ok && !b_ok) r.b += 1;
    if (!a_ok && b_ok) r.c += 1;
  }
  const int64_t disc = r.b + r.c;
  if (disc > 0) {
    double d = std::max<double>(0.0, std::fabs(static_cast<double>(r.b - r.c)) - 1.0);
    r.statistic = d * d / static_cast<double>(disc);
  }
  if (disc >= 25) {
    r.exact = false;
    r.p = chi2_sf_1df(r.statistic);
  } else {
    r.exact = true;
    // two-sided exact binomial at rate 1/2; counts fit a double exactly
    int64_t lo = std::min(r.b, r.c);
    double cum = 0.0, coeff = 1.0;  // C(disc, 0)
    for (int64_t k = 0; k <= lo; ++k) {
      cum += coeff;
      coeff = coeff * static_cast<double>(disc - k) / static_cast<double>(k + 1);
    }
    r.p = std::min(1.0, 2.0 * std::ldexp(cum, -static_cast<int>(disc)));
  }
  return r;
}

WelchResult welch_ttest(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2 || y.size() < 2)
    fail(ErrorCode::bad_argument, "welch t-test needs n >= 2 per group");
  auto stats = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double t : v) mean += t;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double t : v) ss += (t - mean) * (t - mean);
    return std::make_pair(mean, ss / static_cast<double>(v.size() - 1));
  };
  auto [mx, s2x] = stats(x);
  auto [my, s2y] = stats(y);
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  WelchResult r;
  if (s2x == 0.0 && s2y == 0.0) {
    r.df = nx + ny - 2.0;
    if (mx == my) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), mx - my);
      r.p = 0.0;
    }
    return r;
  }
  const double ax = s2x / nx, ay = s2y / ny;
  const double se2 = ax + ay;
  r.t = (mx - my) / std::sqrt(se2);
  r.df = se2 * se2 / (ax * ax / (nx - 1.0) + ay * ay / (ny - 1.0));
  r.p = 2.0 * student_sf(std::fabs(r.t), r.df);
  return r;
}

Chi2Result chi2_test(const std::array<std::array<int64_t, 2>, 2>& counts) {
  for (const auto& row : counts)
    for (int64_t v : row)
      if (v < 0) fail(ErrorCode::bad_argument, "counts must be nonnegative");
  const double r0 = static_cast<double>(counts[0][0] + counts[0][1]);
  const double r1 = static_cast<double>(counts[1][0] + counts[1][1]);
  const double c0 = static_cast<double>(counts[0][0] + counts[1][0]);
  const double c1 = static_cast<double>(counts[0][1] + counts[1][1]);
  const double total = r0 + r1;
  if (r0 == 0.0 || r1 == 0.0 || c0 == 0.0 || c1 == 0.0)
    fail(ErrorCode::bad_argument, "a zero table margin leaves the test undefined");
  Chi2Result res;
  const double rows[2] = {r0, r1}, cols[2] = {c0, c1};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double expected = rows[i] * cols[j] / total;
      const double d = static_cast<double>(counts[i][j]) - expected;
      res.chi2 += d * d / expected;
    }
  res.p = chi2_sf_1df(res.chi2);
  return res;
}

}  // namespace ctomics
