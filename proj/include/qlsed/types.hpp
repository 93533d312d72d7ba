#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Core>

namespace qlsed {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using VectorXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using MatrixXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

using Complex = std::complex<double>;
using Vector = VectorX<double>;
using Array = ArrayX<double>;
using CVector = VectorXc<double>;
using Matrix = MatrixX<double>;
using CMatrix = MatrixXc<double>;
using Matrix2 = Eigen::Matrix2d;
using Vector2 = Eigen::Vector2d;
using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into [0, 2π).
template <typename Scalar>
Scalar wrap_angle(Scalar omega) {
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  Scalar w = std::fmod(omega, two_pi);
  if (w < Scalar(0)) w += two_pi;
  if (w >= two_pi) w = Scalar(0);
  return w;
}

/// Wrap-around distance between two angles, in [0, π].
template <typename Scalar>
Scalar wrap_distance(Scalar a, Scalar b) {
  const Scalar d = wrap_angle(a - b);
  return std::min(d, Scalar(2) * std::numbers::pi_v<Scalar> - d);
}

/// One complex sinusoid: frequency in radians/sample and complex amplitude.
struct SinusoidComponent {
  double omega = 0.0;
  Complex amp{0.0, 0.0};
};

using ComponentList = std::vector<SinusoidComponent>;

/// Interleave a complex vector as [Re; Im] (length 2N).
inline Vector stack_real(const CVector& z) {
  const Eigen::Index n = z.size();
  Vector out(2 * n);
  out.head(n) = z.real();
  out.tail(n) = z.imag();
  return out;
}

inline CVector unstack_real(const Vector& v) {
  const Eigen::Index n = v.size() / 2;
  CVector out(n);
  out.real() = v.head(n);
  out.imag() = v.tail(n);
  return out;
}

inline double db10(double x) { return 10.0 * std::log10(x); }
inline double db20(double x) { return 20.0 * std::log10(x); }
inline double from_db10(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace qlsed
