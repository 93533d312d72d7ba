#include "qlsed/special_functions.hpp"

#include <algorithm>
#include <cmath>

namespace qlsed {

namespace {

double log_poisson_pmf(double j, double mean) {
  if (mean == 0.0) return j == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return j * std::log(mean) - mean - std::lgamma(j + 1.0);
}

// Index past which a Poisson(mean) tail is below ~1e-20.
long poisson_cutoff(double mean) {
  return static_cast<long>(std::ceil(mean + 12.0 * std::sqrt(mean) + 50.0));
}

}  // namespace

// Q_1(a, b) = Pr(Y <= X) with X ~ Poisson(a²/2), Y ~ Poisson(b²/2), which is
// the Poisson-mixture form of the noncentral chi-squared(2, a²) tail at b².
// The outer sum runs over whichever variable has the smaller mean; both
// branches sum nonnegative terms only.
double marcum_q1(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw std::domain_error("marcum_q1: arguments must be nonnegative");
  if (b == 0.0) return 1.0;
  if (a == 0.0) return std::exp(-0.5 * b * b);
  if (std::isinf(b)) return 0.0;
  if (std::isinf(a)) return 1.0;

  const double mx = 0.5 * a * a;
  const double my = 0.5 * b * b;
  double sum = 0.0;
  if (mx <= my) {
    const long jmax = poisson_cutoff(mx);
    double cdf_y = 0.0;
    for (long j = 0; j <= jmax; ++j) {
      const double dj = static_cast<double>(j);
      cdf_y += std::exp(log_poisson_pmf(dj, my));
      sum += std::exp(log_poisson_pmf(dj, mx)) * std::min(cdf_y, 1.0);
    }
    return std::clamp(sum, 0.0, 1.0);
  }
  const long jmax = poisson_cutoff(my);
  double cdf_x = 0.0;
  for (long j = 0; j <= jmax; ++j) {
    const double dj = static_cast<double>(j);
    sum += std::exp(log_poisson_pmf(dj, my)) * std::min(cdf_x, 1.0);
    cdf_x += std::exp(log_poisson_pmf(dj, mx));
  }
  return std::clamp(1.0 - sum, 0.0, 1.0);
}

double chi2_2dof_cdf(double x) {
  if (!(x >= 0.0)) throw std::domain_error("chi2_2dof_cdf: x must be nonnegative");
  return -std::expm1(-0.5 * x);
}

double chi2_2dof_quantile(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw std::domain_error("chi2_2dof_quantile: p must lie in [0, 1)");
  return -2.0 * std::log1p(-p);
}

}  // namespace qlsed
