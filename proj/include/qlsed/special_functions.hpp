#pragma once

// Scalar kernels for Gaussian interval censoring: normal pdf/cdf, the scaled
// complementary error function, tail-stable moments of a truncated standard
// normal cell, Marcum Q_1 and the 2-dof chi-squared distribution.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace qlsed {

template <typename Scalar>
Scalar normal_pdf(Scalar x) {
  const Scalar inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<Scalar> / std::numbers::sqrt2_v<Scalar>;
  return inv_sqrt_2pi * std::exp(-Scalar(0.5) * x * x);
}

template <typename Scalar>
Scalar normal_cdf(Scalar x) {
  return Scalar(0.5) * std::erfc(-x / std::numbers::sqrt2_v<Scalar>);
}

/// exp(x^2) erfc(x). Accurate for all x >= 0; for x < 0 uses the reflection
/// 2 exp(x^2) - erfcx(-x), which overflows below about -26.
template <typename Scalar>
Scalar erfcx(Scalar x) {
  if (x < Scalar(0)) return Scalar(2) * std::exp(x * x) - erfcx(-x);
  if (x < Scalar(5)) return std::exp(x * x) * std::erfc(x);
  if (std::isinf(x)) return Scalar(0);
  // Laplace continued fraction, evaluated bottom-up.
  Scalar t = x;
  for (int k = 60; k >= 1; --k) t = x + (Scalar(k) / Scalar(2)) / t;
  return std::numbers::inv_sqrtpi_v<Scalar> / t;
}

/// log Φ(x) without underflow in the left tail.
template <typename Scalar>
Scalar log_normal_cdf(Scalar x) {
  if (x < Scalar(-5)) {
    return std::log(Scalar(0.5) * erfcx(-x / std::numbers::sqrt2_v<Scalar>)) - Scalar(0.5) * x * x;
  }
  if (x > Scalar(0)) return std::log1p(-normal_cdf(-x));
  return std::log(normal_cdf(x));
}

/// Moments of the standard normal restricted to the cell (a, b), a < b.
/// With P = Φ(b) - Φ(a):
///   ratio = (φ(b) - φ(a)) / P
///   m1    = (b φ(b) - a φ(a)) / P
///   m3    = (b³ φ(b) - a³ φ(a)) / P
/// Infinite endpoints contribute zero to every numerator.
template <typename Scalar>
struct CellMoments {
  Scalar log_prob;
  Scalar ratio;
  Scalar m1;
  Scalar m3;
};

namespace detail {

// 8-point Gauss-Legendre on [-1, 1].
inline constexpr std::array<double, 4> kGlNodes = {0.1834346424956498, 0.5255324099163290,
                                                   0.7966664774136267, 0.9602898564975363};
inline constexpr std::array<double, 4> kGlWeights = {0.3626837833783620, 0.3137066458778873,
                                                     0.2223810344533745, 0.1012285362903763};

// ∫_a^b exp(-(t² - p²)/2) dt on a short interval.
template <typename Scalar>
Scalar scaled_gauss_integral(Scalar a, Scalar b, Scalar p) {
  const Scalar half = Scalar(0.5) * (b - a);
  const Scalar mid = Scalar(0.5) * (b + a);
  const Scalar p2 = p * p;
  Scalar acc = 0;
  for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
    const Scalar d = half * Scalar(kGlNodes[i]);
    const Scalar t1 = mid - d;
    const Scalar t2 = mid + d;
    acc += Scalar(kGlWeights[i]) *
           (std::exp(-Scalar(0.5) * (t1 * t1 - p2)) + std::exp(-Scalar(0.5) * (t2 * t2 - p2)));
  }
  return acc * half;
}

}  // namespace detail

template <typename Scalar>
CellMoments<Scalar> cell_moments(Scalar a, Scalar b) {
  constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
  const Scalar c = std::numbers::inv_sqrtpi_v<Scalar> / std::numbers::sqrt2_v<Scalar>;
  const Scalar log_c = std::log(c);

  // Reflect so that a < 0; ratio is odd under (a, b) -> (-b, -a), m1 and m3 are even.
  bool flipped = false;
  if (a >= Scalar(0)) {
    const Scalar t = a;
    a = -b;
    b = -t;
    flipped = true;
  }

  CellMoments<Scalar> out{};
  const Scalar width = b - a;
  const Scalar zmax = std::max(std::abs(a), std::abs(b));

  if (std::isfinite(width) && width * (zmax + Scalar(1)) < Scalar(0.5)) {
    // Narrow cell: direct quadrature, endpoint differences through expm1.
    const Scalar p = (b <= Scalar(0)) ? b : Scalar(0);
    const Scalar ea = std::exp(-Scalar(0.5) * (a * a - p * p));
    const Scalar em = std::expm1(-Scalar(0.5) * width * (b + a));
    const Scalar d = detail::scaled_gauss_integral(a, b, p);
    out.log_prob = log_c - Scalar(0.5) * p * p + std::log(d);
    out.ratio = ea * em / d;
    out.m1 = ea * (width + b * em) / d;
    out.m3 = ea * (width * (b * b + a * b + a * a) + b * b * b * em) / d;
  } else if (b <= Scalar(0)) {
    // Left tail, everything scaled by exp(-b²/2).
    const Scalar eb = Scalar(0.5) * erfcx(-b / std::numbers::sqrt2_v<Scalar>);
    Scalar r = 0, ea_r = 0, a_r = 0, a3_r = 0;
    if (a > -kInf) {
      r = std::exp(-Scalar(0.5) * (a - b) * (a + b));
      ea_r = Scalar(0.5) * erfcx(-a / std::numbers::sqrt2_v<Scalar>) * r;
      a_r = a * r;
      a3_r = a * a * a_r;
    }
    const Scalar den = eb - ea_r;
    out.log_prob = -Scalar(0.5) * b * b + std::log(den);
    out.ratio = c * (Scalar(1) - r) / den;
    out.m1 = c * (b - a_r) / den;
    out.m3 = c * (b * b * b - a3_r) / den;
  } else {
    // Straddles zero: no tail cancellation.
    const Scalar cdf_a = (a > -kInf) ? normal_cdf(a) : Scalar(0);
    const Scalar sf_b = (b < kInf) ? normal_cdf(-b) : Scalar(0);
    const Scalar prob = (Scalar(0.5) - cdf_a) + (Scalar(0.5) - sf_b);
    const Scalar pdf_a = (a > -kInf) ? normal_pdf(a) : Scalar(0);
    const Scalar pdf_b = (b < kInf) ? normal_pdf(b) : Scalar(0);
    const Scalar apa = (a > -kInf) ? a * pdf_a : Scalar(0);
    const Scalar bpb = (b < kInf) ? b * pdf_b : Scalar(0);
    out.log_prob = std::log(prob);
    out.ratio = (pdf_b - pdf_a) / prob;
    out.m1 = (bpb - apa) / prob;
    out.m3 = ((b < kInf ? b * b * bpb : Scalar(0)) - (a > -kInf ? a * a * apa : Scalar(0))) / prob;
  }
  if (flipped) out.ratio = -out.ratio;
  return out;
}

/// (φ(b) - φ(a)) / (Φ(b) - Φ(a)) for a < b; either bound may be infinite.
template <typename Scalar>
Scalar gauss_ratio(Scalar a, Scalar b) {
  if (!(a < b)) throw std::domain_error("gauss_ratio: requires a < b");
  return cell_moments(a, b).ratio;
}

/// Marcum Q-function of order one, Q_1(a, b) = Pr(|a + n| > b) for a
/// standard complex-Gaussian n with unit variance per real dimension.
double marcum_q1(double a, double b);

/// CDF of the central chi-squared distribution with 2 degrees of freedom.
double chi2_2dof_cdf(double x);

/// Inverse of chi2_2dof_cdf; p in [0, 1).
double chi2_2dof_quantile(double p);

}  // namespace qlsed
