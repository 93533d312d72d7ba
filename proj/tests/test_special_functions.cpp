#include <catch_amalgamated.hpp>

#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <limits>

#include "qlsed/special_functions.hpp"

using qlsed::cell_moments;
using qlsed::gauss_ratio;
using qlsed::marcum_q1;
using qlsed::normal_cdf;
using qlsed::normal_pdf;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Big big_pdf(const Big& x) { return exp(-x * x / 2) / sqrt(2 * boost::math::constants::pi<Big>()); }

// Φ(b) - Φ(a) through whichever erfc form avoids cancellation.
Big big_mass(double a, double b) {
  const Big r2 = sqrt(Big(2));
  if (a >= 0) {
    const Big ua = std::isinf(a) ? Big(0) : erfc(Big(a) / r2);
    const Big ub = std::isinf(b) ? Big(0) : erfc(Big(b) / r2);
    return (ua - ub) / 2;
  }
  const Big la = std::isinf(a) ? Big(0) : erfc(-Big(a) / r2);
  const Big lb = std::isinf(b) ? Big(2) : erfc(-Big(b) / r2);
  return (lb - la) / 2;
}

double oracle_ratio(double a, double b) {
  const Big pa = std::isinf(a) ? Big(0) : big_pdf(Big(a));
  const Big pb = std::isinf(b) ? Big(0) : big_pdf(Big(b));
  return static_cast<double>((pb - pa) / big_mass(a, b));
}

double oracle_m1(double a, double b) {
  const Big ta = std::isinf(a) ? Big(0) : Big(a) * big_pdf(Big(a));
  const Big tb = std::isinf(b) ? Big(0) : Big(b) * big_pdf(Big(b));
  return static_cast<double>((tb - ta) / big_mass(a, b));
}

// Q_1(a, b) = exp(-(a² + b²)/2) Σ_k (a/b)^k I_k(ab) for a < b, and the
// complementary series for a >= b, in 50-digit arithmetic.
double oracle_marcum(double a, double b) {
  const Big A(a), B(b);
  const Big pre = exp(-(A * A + B * B) / 2);
  const Big x = A * B;
  Big sum = 0;
  if (a < b) {
    const Big r = A / B;
    Big rk = 1;
    for (int k = 0; k < 400; ++k) {
      const Big term = rk * boost::math::cyl_bessel_i(k, x);
      sum += term;
      if (k > 10 && term < sum * Big(1e-40)) break;
      rk *= r;
    }
    return static_cast<double>(pre * sum);
  }
  const Big r = B / A;
  Big rk = r;
  for (int k = 1; k < 400; ++k) {
    const Big term = rk * boost::math::cyl_bessel_i(k, x);
    sum += term;
    if (k > 10 && term < sum * Big(1e-40)) break;
    rk *= r;
  }
  return static_cast<double>(1 - pre * sum);
}

}  // namespace

TEST_CASE("normal pdf and cdf basics") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_pdf(0.0) == Catch::Approx(0.3989422804014327).epsilon(1e-15));
}

TEST_CASE("normal cdf left tail against 50-digit erfc") {
  for (double x : {-1.0, -5.0, -10.0, -20.0, -30.0, -37.0}) {
    const double ref = static_cast<double>(erfc(-Big(x) / sqrt(Big(2))) / 2);
    INFO("x = " << x);
    CHECK(std::abs(normal_cdf(x) - ref) <= 1e-10 * ref);
  }
}

TEST_CASE("log normal cdf stays finite far into the tail") {
  for (double x : {-3.0, -10.0, -40.0, -200.0, -1e4}) {
    const Big ref = log(erfc(-Big(x) / sqrt(Big(2))) / 2);
    INFO("x = " << x);
    CHECK(std::abs(qlsed::log_normal_cdf(x) - static_cast<double>(ref)) <= 1e-12 * std::abs(static_cast<double>(ref)));
  }
  CHECK(qlsed::log_normal_cdf(40.0) == Catch::Approx(0.0).margin(1e-300));
}

TEST_CASE("erfcx matches the product form where it is representable") {
  for (double x : {0.0, 0.5, 3.0, 4.9, 5.1, 10.0, 25.0}) {
    const Big ref = exp(Big(x) * Big(x)) * erfc(Big(x));
    CHECK(qlsed::erfcx(x) == Catch::Approx(static_cast<double>(ref)).epsilon(1e-13));
  }
}

TEST_CASE("gauss_ratio stated values") {
  CHECK(gauss_ratio(-kInf, 0.0) == Catch::Approx(2.0 * normal_pdf(0.0)).epsilon(1e-14));
  CHECK(gauss_ratio(3.0, 3.0 + 1e-8) == Catch::Approx(-3.0).epsilon(1e-7));
  CHECK(gauss_ratio(8.0, 9.0) == Catch::Approx(oracle_ratio(8.0, 9.0)).epsilon(1e-8));
  CHECK_THROWS_AS(gauss_ratio(1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(gauss_ratio(2.0, 1.0), std::domain_error);
}

TEST_CASE("cell moments against the 50-digit oracle over tails, narrow and wide cells") {
  const double cells[][2] = {{-kInf, 0.0},   {0.0, kInf},    {8.0, 9.0},     {-9.0, -8.0},  {-40.0, -39.0},
                             {30.0, kInf},   {-kInf, -30.0}, {-0.5, 0.25},   {1.0, 1.001},  {-5.0, -4.9999},
                             {12.0, 12.01},  {-2.0, 3.0},    {-kInf, 5.0},   {-6.0, kInf},  {0.0, 1e-6},
                             {-38.0, -37.5}, {2.5, 7.0},     {-1e-3, 1e-3}};
  for (const auto& c : cells) {
    const auto m = cell_moments(c[0], c[1]);
    INFO("cell (" << c[0] << ", " << c[1] << ")");
    const double r = oracle_ratio(c[0], c[1]);
    CHECK(std::abs(m.ratio - r) <= 1e-8 * std::max(1.0, std::abs(r)));
    const double m1 = oracle_m1(c[0], c[1]);
    CHECK(std::abs(m.m1 - m1) <= 1e-8 * std::max(1.0, std::abs(m1)));
    const double lp = static_cast<double>(log(big_mass(c[0], c[1])));
    CHECK(std::abs(m.log_prob - lp) <= 1e-10 * std::max(1.0, std::abs(lp)));
  }
}

TEST_CASE("gauss_ratio lies in (-b, -a) for finite cells") {
  for (double a = -12.0; a < 12.0; a += 0.37) {
    for (double w : {1e-6, 0.01, 0.5, 2.0, 7.0}) {
      const double b = a + w;
      const double r = gauss_ratio(a, b);
      INFO("a = " << a << " b = " << b);
      CHECK(r > -b);
      CHECK(r < -a);
    }
  }
}

TEST_CASE("marcum Q1 closed-form edges") {
  for (double b : {0.0, 0.3, 1.0, 4.0, 10.0}) CHECK(marcum_q1(0.0, b) == Catch::Approx(std::exp(-0.5 * b * b)).epsilon(1e-13));
  for (double a : {0.0, 0.1, 3.0, 50.0}) CHECK(marcum_q1(a, 0.0) == 1.0);
  CHECK_THROWS_AS(marcum_q1(-1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(marcum_q1(1.0, -1.0), std::domain_error);
}

TEST_CASE("marcum Q1 against the Bessel-series oracle") {
  CHECK(std::abs(marcum_q1(2.0, 1.0) - oracle_marcum(2.0, 1.0)) < 1e-10);
  const double pts[][2] = {{0.5, 0.5}, {1.0, 3.0}, {3.0, 1.0}, {4.0, 4.2}, {6.0, 6.3}, {10.0, 8.0},
                           {2.0, 6.5}, {7.0, 4.0}, {0.01, 2.0}, {5.5, 6.1}, {12.0, 11.0}};
  for (const auto& p : pts) {
    INFO("a = " << p[0] << " b = " << p[1]);
    const double ref = oracle_marcum(p[0], p[1]);
    CHECK(std::abs(marcum_q1(p[0], p[1]) - ref) <= 1e-8 * std::max(ref, 1e-300) + 1e-14);
  }
}

TEST_CASE("marcum Q1 equals the noncentral chi-squared tail") {
  for (double a : {0.5, 1.5, 3.0, 5.0}) {
    for (double b : {0.5, 2.0, 4.5, 7.0}) {
      boost::math::non_central_chi_squared dist(2.0, a * a);
      const double ref = boost::math::cdf(boost::math::complement(dist, b * b));
      INFO("a = " << a << " b = " << b);
      CHECK(std::abs(marcum_q1(a, b) - ref) <= 1e-9);
    }
  }
}

TEST_CASE("chi-squared with two degrees of freedom") {
  CHECK(qlsed::chi2_2dof_cdf(0.0) == 0.0);
  CHECK(qlsed::chi2_2dof_quantile(1.0 - 0.01) == Catch::Approx(-2.0 * std::log(0.01)).epsilon(1e-12));
  CHECK(qlsed::chi2_2dof_cdf(qlsed::chi2_2dof_quantile(0.37)) == Catch::Approx(0.37).epsilon(1e-12));
  CHECK_THROWS_AS(qlsed::chi2_2dof_quantile(1.0), std::domain_error);
  CHECK_THROWS_AS(qlsed::chi2_2dof_quantile(-0.1), std::domain_error);
  CHECK_THROWS_AS(qlsed::chi2_2dof_cdf(-1.0), std::domain_error);
}
