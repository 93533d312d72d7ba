#include "qlsed/rao.hpp"

#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace qlsed {

namespace {

// vᵀ M⁻¹ v with M = [[P + Re Q, -Im Q], [-Im Q, P - Re Q]], v = [Re z, Im z].
RaoValue quadratic_statistic(Complex z, double p, Complex q) {
  RaoValue out;
  const double det = p * p - std::norm(q);
  if (p > 0.0 && det > 1e-10 * p * p) {
    out.value = std::max(0.0, (p * std::norm(z) - (q * z * z).real()) / det);
    return out;
  }
  out.degenerate = true;
  // Eigenpairs of M: p ± |q| with vectors (cos θ/2, -sin θ/2) and (sin θ/2, cos θ/2), θ = arg q.
  const double mag = std::abs(q);
  const double half = 0.5 * std::arg(q);
  const double lam[2] = {p + mag, p - mag};
  const double proj[2] = {std::cos(half) * z.real() - std::sin(half) * z.imag(),
                          std::sin(half) * z.real() + std::cos(half) * z.imag()};
  const double top = std::max(std::abs(lam[0]), std::abs(lam[1]));
  for (int i = 0; i < 2; ++i) {
    if (lam[i] > 1e-12 * top && lam[i] > 0.0) out.value += proj[i] * proj[i] / lam[i];
  }
  return out;
}

void check_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("false-alarm probability must lie in (0, 1)");
}

void set_argmax(RaoGridResult& r) {
  Eigen::Index best = 0;
  for (Eigen::Index g = 1; g < r.values.size(); ++g) {
    if (r.values[g] > r.values[best]) best = g;
  }
  r.argmax = best;
  r.max_value = r.values.size() ? r.values[best] : 0.0;
}

Vector grid_omegas(Eigen::Index count) {
  Vector w(count);
  for (Eigen::Index g = 0; g < count; ++g) w[g] = kTwoPi * static_cast<double>(g) / static_cast<double>(count);
  return w;
}

}  // namespace

RaoValue rao_statistic(const CVector& phi, const CVector& zeta, const CVector& atom_vec, double sigma,
                       const ChannelQuantizer& quantizer) {
  if (phi.size() != zeta.size() || atom_vec.size() != zeta.size()) {
    throw std::invalid_argument("rao_statistic: length mismatch");
  }
  const InfoDensity h = h_plus_minus(zeta, sigma, quantizer);
  const Complex z = atom_vec.dot(phi);  // aᴴφ
  const double p = (atom_vec.array().abs2() * h.plus.array()).sum();
  const Complex q = (atom_vec.array().square() * h.minus.array().cast<Complex>()).sum();
  return quadratic_statistic(z, p, q);
}

RaoValue rao_statistic(const CVector& phi, const CVector& zeta, double omega, double sigma,
                       const ChannelQuantizer& quantizer) {
  return rao_statistic(phi, zeta, atom(omega, zeta.size()), sigma, quantizer);
}

double rao_statistic_simplified(const CVector& phi, const CVector& zeta, const CVector& atom_vec, double sigma,
                                const ChannelQuantizer& quantizer) {
  if (phi.size() != zeta.size() || atom_vec.size() != zeta.size()) {
    throw std::invalid_argument("rao_statistic_simplified: length mismatch");
  }
  const InfoDensity h = h_plus_minus(zeta, sigma, quantizer);
  const double p = (atom_vec.array().abs2() * h.plus.array()).sum();
  return std::norm(atom_vec.dot(phi)) / p;
}

double rao_statistic_simplified(const CVector& phi, const CVector& zeta, double omega, double sigma,
                                const ChannelQuantizer& quantizer) {
  return rao_statistic_simplified(phi, zeta, atom(omega, zeta.size()), sigma, quantizer);
}

Eigen::Index RaoGridResult::dft_argmax() const {
  Eigen::Index best = 0;
  for (Eigen::Index g = oversample; g < values.size(); g += oversample) {
    if (values[g] > values[best]) best = g;
  }
  return best;
}

RaoGridResult rao_grid(const CVector& phi, const CVector& zeta, double sigma, const ChannelQuantizer& quantizer,
                       int oversample, const SensingModel& model) {
  if (oversample < 1) throw std::invalid_argument("rao_grid: oversampling factor must be >= 1");
  if (phi.size() != zeta.size()) throw std::invalid_argument("rao_grid: length mismatch");
  const Eigen::Index m = zeta.size();
  const Eigen::Index n = model.signal_length(m);
  const Eigen::Index count = n * oversample;
  const InfoDensity h = h_plus_minus(zeta, sigma, quantizer);

  RaoGridResult r;
  r.oversample = oversample;
  r.omegas = grid_omegas(count);
  r.values.resize(count);

  if (model.compressive()) {
    CMatrix grid_atoms(n, count);
    for (Eigen::Index g = 0; g < count; ++g) grid_atoms.col(g) = atom(r.omegas[g], n);
    const CMatrix measured = model.matrix() * grid_atoms;
    const CVector z = measured.adjoint() * phi;
    const Vector p = measured.cwiseAbs2().transpose() * h.plus;
    const CVector q = measured.array().square().matrix().transpose() * h.minus.cast<Complex>();
    for (Eigen::Index g = 0; g < count; ++g) r.values[g] = quadratic_statistic(z[g], p[g], q[g]).value;
    set_argmax(r);
    return r;
  }

  Eigen::FFT<double> fft;
  std::vector<Complex> in(static_cast<std::size_t>(count), Complex(0.0, 0.0));
  std::vector<Complex> spec_phi, spec_h;
  for (Eigen::Index i = 0; i < m; ++i) in[static_cast<std::size_t>(i)] = phi[i];
  fft.fwd(spec_phi, in);
  for (Eigen::Index i = 0; i < m; ++i) in[static_cast<std::size_t>(i)] = Complex(h.minus[i], 0.0);
  fft.fwd(spec_h, in);
  const double p = h.plus.sum();
  for (Eigen::Index g = 0; g < count; ++g) {
    const Complex q = std::conj(spec_h[static_cast<std::size_t>((2 * g) % count)]);
    r.values[g] = quadratic_statistic(spec_phi[static_cast<std::size_t>(g)], p, q).value;
  }
  set_argmax(r);
  return r;
}

RaoGridResult rao_grid_direct(const CVector& phi, const CVector& zeta, double sigma,
                              const ChannelQuantizer& quantizer, int oversample, const SensingModel& model) {
  if (oversample < 1) throw std::invalid_argument("rao_grid_direct: oversampling factor must be >= 1");
  const Eigen::Index m = zeta.size();
  const Eigen::Index count = model.signal_length(m) * oversample;
  RaoGridResult r;
  r.oversample = oversample;
  r.omegas = grid_omegas(count);
  r.values.resize(count);
  for (Eigen::Index g = 0; g < count; ++g) {
    r.values[g] = rao_statistic(phi, zeta, model.atom(r.omegas[g], m), sigma, quantizer).value;
  }
  set_argmax(r);
  return r;
}

double threshold_unknown_freq(double p_fa, long n) {
  check_probability(p_fa);
  if (n < 1) throw std::invalid_argument("threshold_unknown_freq: n must be >= 1");
  // 1 - (1 - p)^(1/n) evaluated without cancellation.
  const double per_bin = -std::expm1(std::log1p(-p_fa) / static_cast<double>(n));
  return -2.0 * std::log(per_bin);
}

double threshold_known_freq(double p_fa) {
  check_probability(p_fa);
  return -2.0 * std::log(p_fa);
}

double grid_mismatch_factor(double omega, double grid_omega, long n) {
  double d = wrap_angle(omega - grid_omega);
  if (d > std::numbers::pi) d -= kTwoPi;
  const double nn = static_cast<double>(n);
  if (std::abs(d) < 1e-6) return 1.0 - (nn * nn - 1.0) * d * d / 12.0;
  const double r = std::sin(0.5 * nn * d) / (nn * std::sin(0.5 * d));
  return r * r;
}

double nearest_dft_frequency(double omega, long n) {
  const double step = kTwoPi / static_cast<double>(n);
  const double g = std::round(wrap_angle(omega) / step);
  return wrap_angle(g * step);
}

double noncentrality(const CVector& atom_vec, Complex x, const CVector& zeta, double sigma,
                     const ChannelQuantizer& quantizer, double mismatch_factor) {
  const InfoDensity h = h_plus_minus(zeta, sigma, quantizer);
  const double p = (atom_vec.array().abs2() * h.plus.array()).sum();
  const Complex q = (atom_vec.array().square() * h.minus.array().cast<Complex>()).sum();
  const double lam = 2.0 / (sigma * sigma) * (p * std::norm(x) + (q * x * x).real());
  return std::max(0.0, mismatch_factor * lam);
}

double noncentrality(double omega, Complex x, const CVector& zeta, double sigma, const ChannelQuantizer& quantizer,
                     std::optional<double> grid_freq) {
  const double beta = grid_freq ? grid_mismatch_factor(omega, *grid_freq, zeta.size()) : 1.0;
  return noncentrality(atom(omega, zeta.size()), x, zeta, sigma, quantizer, beta);
}

double predict_pd(double lambda, double p_fa, long n, bool known_freq) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("predict_pd: lambda must be nonnegative");
  const double t = known_freq ? threshold_known_freq(p_fa) : threshold_unknown_freq(p_fa, n);
  return marcum_q1(std::sqrt(lambda), std::sqrt(t));
}

std::vector<TargetPrediction> predict_targets(const ComponentList& truth, double sigma,
                                              const ChannelQuantizer& quantizer, double p_fa, Eigen::Index measurements,
                                              const SensingModel& model) {
  const long n = static_cast<long>(model.signal_length(measurements));
  std::vector<TargetPrediction> out;
  out.reserve(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ComponentList others;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      if (k != i) others.push_back(truth[k]);
    }
    const CVector zeta = model.synthesize(others, measurements);
    const CVector a = model.atom(truth[i].omega, measurements);
    const double beta = grid_mismatch_factor(truth[i].omega, nearest_dft_frequency(truth[i].omega, n), n);
    TargetPrediction t;
    t.lambda = noncentrality(a, truth[i].amp, zeta, sigma, quantizer, beta);
    t.p_d = predict_pd(t.lambda, p_fa, n, false);
    t.snr_loss_db = snr_loss(a, zeta, sigma, quantizer);
    out.push_back(t);
  }
  return out;
}

double predict_pd_all(const std::vector<TargetPrediction>& targets) {
  double p = 1.0;
  for (const auto& t : targets) p *= t.p_d;
  return p;
}

}  // namespace qlsed
