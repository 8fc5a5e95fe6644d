#pragma once

// Independent numerical oracles used by the test suites. Nothing here
// touches the library's inference path: the t distribution is integrated by
// Simpson quadrature and inverted by bisection, and the two-sample
// Kolmogorov-Smirnov tail uses the standard series approximation.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

inline double t_pdf(double x, double dof) {
  const double c = std::lgamma((dof + 1.0) / 2.0) - std::lgamma(dof / 2.0) -
                   0.5 * std::log(dof * 3.14159265358979323846);
  return std::exp(c - 0.5 * (dof + 1.0) * std::log1p(x * x / dof));
}

// CDF via Simpson's rule on [0, x]; |x| <= 60 is plenty for any test here.
inline double t_cdf(double x, double dof) {
  const double hi = std::abs(x);
  const int n = 8192;  // even
  const double h = hi / n;
  double sum = t_pdf(0.0, dof) + t_pdf(hi, dof);
  for (int k = 1; k < n; ++k) sum += (k % 2 ? 4.0 : 2.0) * t_pdf(k * h, dof);
  const double half = sum * h / 3.0;
  return x >= 0.0 ? 0.5 + half : 0.5 - half;
}

inline double t_quantile(double prob, double dof) {
  double lo = 0.0, hi = 60.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (t_cdf(mid, dof) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Two-sample Kolmogorov-Smirnov p-value (asymptotic tail with the usual
// finite-sample adjustment to the effective sample size).
inline double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    d = std::max(d, std::abs(ia / na - ib / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace oracle
