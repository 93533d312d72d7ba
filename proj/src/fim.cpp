#include "qlsed/fim.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/LU>

namespace qlsed {

namespace {

void finish(FimResult& r) {
  const double norm = r.matrix.norm();
  Eigen::FullPivLU<Matrix> lu(r.matrix);
  lu.setThreshold(1e3 * std::numeric_limits<double>::epsilon());
  if (norm == 0.0 || !lu.isInvertible()) {
    r.singular = true;
    r.inverse.resize(0, 0);
    r.crb_trace = std::numeric_limits<double>::infinity();
    return;
  }
  r.inverse = lu.inverse();
  r.inverse = 0.5 * (r.inverse + r.inverse.transpose()).eval();
  r.crb_trace = r.inverse.trace();
}

// Stacked per-channel h(μ - offset).
Vector channel_info(const CVector& mean, double sigma, const ChannelQuantizer& q) {
  const Vector mu = stack_real(mean);
  Vector h(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) h[i] = h_info(mu[i] - q.offset(i), sigma, q.spec);
  return h;
}

}  // namespace

FimResult fim_amplitude(const CVector& atom_vec, Complex x, const CVector& zeta, double sigma,
                        const ChannelQuantizer& quantizer) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const InfoDensity h = h_plus_minus(zeta + atom_vec * x, sigma, quantizer);
  const double p = (atom_vec.array().abs2() * h.plus.array()).sum();
  const Complex q = (atom_vec.array().square() * h.minus.array().cast<Complex>()).sum();
  const double c = 2.0 / (sigma * sigma);
  FimResult r;
  r.matrix.resize(2, 2);
  r.matrix << c * (p + q.real()), -c * q.imag(), -c * q.imag(), c * (p - q.real());
  r.labels = {"re_x", "im_x"};
  // Closed-form 2x2 inverse.
  const double det = c * c * (p * p - std::norm(q));
  if (!(det > 1e3 * std::numeric_limits<double>::epsilon() * r.matrix.squaredNorm())) {
    r.singular = true;
    r.crb_trace = std::numeric_limits<double>::infinity();
    return r;
  }
  r.inverse.resize(2, 2);
  r.inverse << r.matrix(1, 1), -r.matrix(0, 1), -r.matrix(1, 0), r.matrix(0, 0);
  r.inverse /= det;
  r.crb_trace = r.inverse.trace();
  return r;
}

FimResult fim_amplitude(double omega, Complex x, const CVector& zeta, double sigma,
                        const ChannelQuantizer& quantizer) {
  return fim_amplitude(atom(omega, zeta.size()), x, zeta, sigma, quantizer);
}

FimResult fim_general(const ComponentList& components, const CVector& zeta, double sigma,
                      const ChannelQuantizer& quantizer, const SensingModel& model, FimParameters params) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const Eigen::Index m = zeta.size();
  const bool with_freq = params == FimParameters::FrequencyAndAmplitude;
  const Eigen::Index per = with_freq ? 3 : 2;
  Matrix jac(2 * m, per * static_cast<Eigen::Index>(components.size()));
  FimResult r;
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& c = components[k];
    const CVector a = model.derivative(c.omega, m, 0);
    const std::string idx = std::to_string(k);
    if (with_freq) {
      jac.col(col++) = stack_real(model.derivative(c.omega, m, 1) * c.amp);
      r.labels.push_back("omega_" + idx);
    }
    jac.col(col++) = stack_real(a);
    jac.col(col++) = stack_real(a * Complex(0.0, 1.0));
    r.labels.push_back("re_x_" + idx);
    r.labels.push_back("im_x_" + idx);
  }
  const Vector h = channel_info(zeta + model.synthesize(components, m), sigma, quantizer);
  r.matrix = (2.0 / (sigma * sigma)) * (jac.transpose() * h.asDiagonal() * jac);
  r.matrix = 0.5 * (r.matrix + r.matrix.transpose()).eval();
  finish(r);
  return r;
}

double crb_frequency_trace(const FimResult& fim) {
  if (fim.singular) return std::numeric_limits<double>::infinity();
  double t = 0.0;
  for (std::size_t i = 0; i < fim.labels.size(); ++i) {
    if (fim.labels[i].rfind("omega_", 0) == 0) t += fim.inverse(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
  }
  return t;
}

double snr_loss(const CVector& atom_vec, const CVector& zeta, double sigma, const ChannelQuantizer& quantizer) {
  const InfoDensity h = h_plus_minus(zeta, sigma, quantizer);
  const double num = atom_vec.squaredNorm();
  const double den = (atom_vec.array().abs2() * h.plus.array()).sum();
  return db10(num / den);
}

double snr_loss(double omega, const CVector& zeta, double sigma, const ChannelQuantizer& quantizer) {
  return snr_loss(atom(omega, zeta.size()), zeta, sigma, quantizer);
}

double snr_loss_1bit_approx(const CVector& zeta, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const double split = std::sqrt(8.0 / std::numbers::pi) * sigma;
  auto term = [&](double v) {
    const double e = std::exp(-v * v / (sigma * sigma));
    if (std::abs(v) <= split) return (2.0 / std::numbers::pi) * e;
    return std::abs(v) / (std::sqrt(std::numbers::pi) * sigma) * e;
  };
  double den = 0.0;
  for (Eigen::Index n = 0; n < zeta.size(); ++n) den += term(zeta[n].real()) + term(zeta[n].imag());
  return db10(2.0 * static_cast<double>(zeta.size()) / den);
}

}  // namespace qlsed
