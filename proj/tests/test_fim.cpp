#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "qlsed/fim.hpp"

using namespace qlsed;

namespace {

CVector noise(std::mt19937_64& rng, Eigen::Index n, double sigma) {
  std::normal_distribution<double> nd(0.0, sigma / std::sqrt(2.0));
  CVector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = nd(rng);
    w[i] = Complex(re, nd(rng));
  }
  return w;
}

double db(double v) { return 10.0 * std::log10(v); }

}  // namespace

TEST_CASE("unquantized amplitude information is diagonal") {
  for (double sigma : {0.5, 1.0, 3.0}) {
    const int n = 64;
    const auto f = fim_amplitude(0.9, Complex(0.3, -1.0), 0.4 * atom(2.0, n), sigma, make_quantizer(kInfiniteBits, 1.0));
    const Matrix expect = (2.0 * n / (sigma * sigma)) * Matrix::Identity(2, 2);
    CHECK((f.matrix - expect).norm() <= 1e-12 * expect.norm());
    CHECK(f.crb_trace == Catch::Approx(sigma * sigma / n).epsilon(1e-12));
  }
}

TEST_CASE("one-bit information at zero threshold and zero amplitude") {
  const int n = 40;
  const double sigma = 1.7;
  const auto f = fim_amplitude(1.2, Complex(0.0, 0.0), CVector::Zero(n), sigma, make_quantizer(1, 1.0));
  const Matrix expect = (2.0 * n / (sigma * sigma)) * (2.0 / std::numbers::pi) * Matrix::Identity(2, 2);
  CHECK((f.matrix - expect).norm() <= 1e-12 * expect.norm());
}

TEST_CASE("amplitude information equals the score covariance") {
  std::mt19937_64 rng(21);
  const int n = 8, draws = 1000000;
  const double sigma = 1.0;
  const CVector a = atom(0.8, n);
  const CVector zeta = Complex(0.5, 0.2) * atom(2.3, n);
  const Complex x(0.6, -0.4);
  const auto q = make_quantizer(2, 1.5);
  const CVector mean = zeta + a * x;
  Matrix2 sum = Matrix2::Zero(), sum_sq = Matrix2::Zero();
  for (int d = 0; d < draws; ++d) {
    const auto obs = quantize_complex(mean + noise(rng, n, sigma), q);
    const Vector2 s = amp_gradient_hessian(obs, zeta, a, x, sigma).gradient;
    const Matrix2 outer = s * s.transpose();
    sum += outer;
    sum_sq += outer.cwiseProduct(outer);
  }
  const Matrix2 mc = sum / draws;
  const Matrix2 se = ((sum_sq / draws - mc.cwiseProduct(mc)) / draws).cwiseSqrt();
  const Matrix fim = fim_amplitude(a, x, zeta, sigma, q).matrix;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      INFO("entry " << i << j << " fim " << fim(i, j) << " mc " << mc(i, j) << " se " << se(i, j));
      CHECK(std::abs(fim(i, j) - mc(i, j)) <= 3.0 * se(i, j));
    }
  }
}

TEST_CASE("amplitude-only restriction of the general information") {
  std::mt19937_64 rng(22);
  for (int bits : {1, 2, 3, kInfiniteBits}) {
    const int n = 48;
    const CVector zeta = 0.7 * atom(1.0, n) + noise(rng, n, 0.3);
    const Complex x(0.9, 0.1);
    const auto q = make_quantizer(bits, 2.0);
    const auto general = fim_general({{2.1, x}}, zeta, 1.1, q, {}, FimParameters::AmplitudeOnly);
    const auto amp = fim_amplitude(2.1, x, zeta, 1.1, q);
    INFO("bits " << bits);
    // Same quantity through two summation orders: equal up to rounding.
    CHECK((general.matrix - amp.matrix).cwiseAbs().maxCoeff() <= 1e-14 * amp.matrix.norm());
    CHECK(general.labels.size() == 2);
  }
}

TEST_CASE("unquantized frequency bound matches the classical line-spectrum bound") {
  for (int n : {16, 64, 256}) {
    for (double sigma : {0.5, 1.0, 2.0}) {
      const Complex x = std::polar(1.3, 0.7);
      const auto f = fim_general({{1.1, x}}, CVector::Zero(n), sigma, make_quantizer(kInfiniteBits, 1.0));
      REQUIRE(!f.singular);
      const double classical = 6.0 * sigma * sigma / (std::norm(x) * n * (static_cast<double>(n) * n - 1.0));
      CHECK(crb_frequency_trace(f) == Catch::Approx(classical).epsilon(1e-9));
    }
  }
}

TEST_CASE("information grows with bit depth") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 32;
    const CVector zeta = 1.5 * atom(0.4 + 0.1 * rep, n) * std::polar(1.0, 0.3 * rep) + noise(rng, n, 0.5);
    const Complex x = std::polar(0.8, 0.2 * rep);
    const double gamma = 3.0;
    double prev = 0.0;
    for (int bits : {1, 2, 3, 4, kInfiniteBits}) {
      const double t = fim_general({{1.7, x}}, zeta, 1.0, make_quantizer(bits, gamma)).matrix.trace();
      CHECK(t >= prev * (1.0 - 1e-12));
      prev = t;
    }
  }
}

TEST_CASE("information matrices are positive semidefinite") {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> uni(0.0, kTwoPi);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 24;
    const int bits = 1 + rep % 4;
    const CVector zeta = noise(rng, n, 2.0);
    const ComponentList comps{{uni(rng), std::polar(1.0, uni(rng))}, {uni(rng), std::polar(0.5, uni(rng))}};
    const auto f = fim_general(comps, zeta, 1.0, make_quantizer(bits, 2.5));
    CHECK((f.matrix - f.matrix.transpose()).norm() <= 1e-12 * f.matrix.norm());
    Eigen::SelfAdjointEigenSolver<Matrix> es(f.matrix);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9 * es.eigenvalues().maxCoeff());
    if (!f.singular) CHECK(f.crb_trace == Catch::Approx(f.inverse.trace()).epsilon(1e-12));
  }
}

TEST_CASE("saturated one-bit records carry no information") {
  const int n = 16;
  const auto f = fim_amplitude(0.5, Complex(0.0, 0.0), CVector::Constant(n, Complex(1e3, 1e3)), 1.0, make_quantizer(1, 1.0));
  CHECK(f.singular);
  CHECK(f.inverse.size() == 0);
}

TEST_CASE("SNR loss") {
  const int n = 1024;
  CHECK(snr_loss(0.3, CVector::Zero(n), 1.0, make_quantizer(1, 1.0)) == Catch::Approx(db(std::numbers::pi / 2)).epsilon(1e-12));
  CHECK(snr_loss(0.3, CVector::Zero(n), 1.0, make_quantizer(kInfiniteBits, 1.0)) == Catch::Approx(0.0).margin(1e-12));

  // Threshold 2·a(ω₀) at σ² = 1, full scale from the design rule.
  const double gamma = design_full_scale({2.0}, 1.0);
  const double scen1[] = {4.8, 2.3, 1.0}, scen2[] = {6.4, 2.2, 0.9};
  for (int bits = 1; bits <= 3; ++bits) {
    const auto q = make_quantizer(bits, gamma);
    CHECK(std::abs(snr_loss(1.0, 2.0 * atom(std::numbers::pi / 2, n), 1.0, q) - scen1[bits - 1]) <= 0.1);
    CHECK(std::abs(snr_loss(1.0, 2.0 * atom(std::numbers::pi / 2 + 0.1, n), 1.0, q) - scen2[bits - 1]) <= 0.1);
  }

  // Two-sinusoid instance: each target sees the other as its threshold.
  const int m = 128;
  const Complex x1(-1.505, -0.497), x2(-0.164, -0.609);
  const auto q1 = make_quantizer(1, 1.0);
  CHECK(std::abs(snr_loss(2.2, x2 * atom(2.4, m), 1.0, q1) - 2.58) <= 0.01);
  CHECK(std::abs(snr_loss(2.4, x1 * atom(2.2, m), 1.0, q1) - 5.21) <= 0.01);
}

TEST_CASE("one-bit SNR loss approximation") {
  const int n = 64;
  CHECK(snr_loss_1bit_approx(CVector::Zero(n), 1.0) == Catch::Approx(db(std::numbers::pi / 2)).epsilon(1e-12));
  CVector half = CVector::Zero(n);
  half.tail(n / 2).setConstant(Complex(40.0, -40.0));
  CHECK(snr_loss_1bit_approx(half, 1.0) == Catch::Approx(db(std::numbers::pi)).epsilon(1e-6));
  CHECK(snr_loss(0.7, half, 1.0, make_quantizer(1, 1.0)) == Catch::Approx(db(std::numbers::pi)).epsilon(1e-6));

  std::mt19937_64 rng(25);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const CVector zeta = noise(rng, n, 1.0 + 0.05 * rep);
    const double exact = snr_loss(0.0, zeta, 1.0, make_quantizer(1, 1.0));
    const double approx = snr_loss_1bit_approx(zeta, 1.0);
    REQUIRE(std::isfinite(approx));
    worst = std::max(worst, std::abs(exact - approx));
  }
  WARN("largest gap between approximate and exact one-bit SNR loss: " << worst << " dB");
}

TEST_CASE("argument checks") {
  CHECK_THROWS_AS(fim_amplitude(0.1, Complex(1.0, 0.0), CVector::Zero(4), 0.0, make_quantizer(1, 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(snr_loss(0.1, CVector::Zero(4), -1.0, make_quantizer(1, 1.0)), std::invalid_argument);
}
