#include "qlsed/likelihood.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace qlsed {

namespace {

constexpr double kLogFloor = -745.0;
std::atomic<long> g_clamped{0};

void check_lengths(const QuantizedObservation& obs, Eigen::Index m) {
  if (obs.size() != m) throw std::invalid_argument("observation and mean lengths differ");
}

// Columns d mean / d[Re x_k, Im x_k] in stacked form.
Matrix amplitude_jacobian(const CMatrix& atoms) {
  const Eigen::Index m = atoms.rows();
  Matrix jac(2 * m, 2 * atoms.cols());
  for (Eigen::Index k = 0; k < atoms.cols(); ++k) {
    jac.col(2 * k).head(m) = atoms.col(k).real();
    jac.col(2 * k).tail(m) = atoms.col(k).imag();
    jac.col(2 * k + 1).head(m) = -atoms.col(k).imag();
    jac.col(2 * k + 1).tail(m) = atoms.col(k).real();
  }
  return jac;
}

CVector to_cvector(const Eigen::Ref<const Vector>& theta) {
  CVector x(theta.size() / 2);
  for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = Complex(theta[2 * k], theta[2 * k + 1]);
  return x;
}

Vector to_theta(const CVector& x) {
  Vector t(2 * x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    t[2 * k] = x[k].real();
    t[2 * k + 1] = x[k].imag();
  }
  return t;
}

double safe_ll(const QuantizedObservation& obs, const CVector& mean, double sigma) {
  const double v = log_likelihood(obs, mean, sigma);
  return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
}

}  // namespace

CVector atom(double omega, Eigen::Index n_samples) { return atom_derivative(omega, n_samples, 0); }

CVector atom_derivative(double omega, Eigen::Index n_samples, int order) {
  CVector a(n_samples);
  for (Eigen::Index n = 0; n < n_samples; ++n) {
    const double dn = static_cast<double>(n);
    Complex v = std::polar(1.0, dn * omega);
    for (int o = 0; o < order; ++o) v *= Complex(0.0, dn);
    a[n] = v;
  }
  return a;
}

CVector SensingModel::derivative(double omega, Eigen::Index measurements, int order) const {
  if (!phi_) return atom_derivative(omega, measurements, order);
  if (phi_->rows() != measurements) throw std::invalid_argument("sensing matrix rows differ from record length");
  return (*phi_) * atom_derivative(omega, phi_->cols(), order);
}

CVector SensingModel::synthesize(const ComponentList& components, Eigen::Index measurements) const {
  const Eigen::Index n = signal_length(measurements);
  CVector s = CVector::Zero(n);
  for (const auto& c : components) s += atom_derivative(c.omega, n, 0) * c.amp;
  if (!phi_) return s;
  return (*phi_) * s;
}

long clamped_cell_count() { return g_clamped.load(std::memory_order_relaxed); }

ChannelTerms channel_terms(const QuantizedObservation& obs, const Vector& mean, double sigma, bool with_scale) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (mean.size() != obs.channels()) throw std::invalid_argument("observation and mean lengths differ");
  const Eigen::Index m = mean.size();
  const double s = sigma / std::numbers::sqrt2;
  const double log_norm = std::log(std::sqrt(2.0 * std::numbers::pi) * s);
  ChannelTerms out;
  out.value.resize(m);
  out.d_mean.resize(m);
  out.d2_mean.resize(m);
  if (with_scale) {
    out.d_logscale.resize(m);
    out.d2_logscale.resize(m);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (obs.exact(i)) {
      const double z = (obs.lower[i] - mean[i]) / s;
      out.value[i] = -0.5 * z * z - log_norm;
      out.d_mean[i] = z / s;
      out.d2_mean[i] = -1.0 / (s * s);
      if (with_scale) {
        out.d_logscale[i] = z * z - 1.0;
        out.d2_logscale[i] = -2.0 * z * z;
      }
      continue;
    }
    const double a = (obs.lower[i] - mean[i]) / s;
    const double b = (obs.upper[i] - mean[i]) / s;
    CellMoments<double> cm = cell_moments(a, b);
    if (!std::isfinite(cm.log_prob) || cm.log_prob < kLogFloor) {
      g_clamped.fetch_add(1, std::memory_order_relaxed);
      cm.log_prob = kLogFloor;
      if (!std::isfinite(cm.ratio)) cm.ratio = 0.0;
      if (!std::isfinite(cm.m1)) cm.m1 = 0.0;
      if (!std::isfinite(cm.m3)) cm.m3 = 0.0;
    }
    out.value[i] = cm.log_prob;
    out.d_mean[i] = -cm.ratio / s;
    out.d2_mean[i] = -(cm.m1 + cm.ratio * cm.ratio) / (s * s);
    if (with_scale) {
      out.d_logscale[i] = -cm.m1;
      out.d2_logscale[i] = cm.m1 - cm.m3 - cm.m1 * cm.m1;
    }
  }
  return out;
}

double log_likelihood(const QuantizedObservation& obs, const CVector& mean, double sigma) {
  check_lengths(obs, mean.size());
  return channel_terms(obs, stack_real(mean), sigma).value.sum();
}

double log_likelihood(const QuantizedObservation& obs, const CVector& zeta, const ComponentList& components,
                      double sigma, const SensingModel& model) {
  check_lengths(obs, zeta.size());
  return log_likelihood(obs, zeta + model.synthesize(components, zeta.size()), sigma);
}

CVector pseudo_measurements(const QuantizedObservation& obs, const CVector& zeta, double sigma) {
  check_lengths(obs, zeta.size());
  const ChannelTerms t = channel_terms(obs, stack_real(zeta), sigma);
  const double s = sigma / std::numbers::sqrt2;
  return unstack_real((t.d_mean * s).matrix());
}

double h_info(double x, double sigma, const QuantizerSpec& spec) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (spec.infinite()) return 1.0;
  const double s = sigma / std::numbers::sqrt2;
  const long b = spec.levels();
  double acc = 0.0;
  for (long d = 0; d < b; ++d) {
    const CellMoments<double> cm = cell_moments((spec.threshold(d) - x) / s, (spec.threshold(d + 1) - x) / s);
    if (cm.ratio == 0.0) continue;
    acc += std::exp(2.0 * std::log(std::abs(cm.ratio)) + cm.log_prob);
  }
  return acc;
}

InfoDensity h_plus_minus(const CVector& eta, double sigma, const ChannelQuantizer& quantizer) {
  // Grid statistics, information matrices and predictions are usually asked
  // for the same threshold signal in a row; keep the last result per thread.
  struct Memo {
    CVector eta;
    double sigma = 0.0;
    QuantizerSpec spec;
    Vector offsets;
    InfoDensity value;
  };
  thread_local Memo memo;
  if (memo.sigma == sigma && memo.spec.bit_depth == quantizer.spec.bit_depth &&
      memo.spec.full_scale == quantizer.spec.full_scale && memo.eta.size() == eta.size() && memo.eta == eta &&
      memo.offsets.size() == quantizer.offsets.size() && memo.offsets == quantizer.offsets) {
    return memo.value;
  }
  const Eigen::Index n = eta.size();
  InfoDensity out{Vector(n), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hr = h_info(eta[i].real() - quantizer.offset(i), sigma, quantizer.spec);
    const double hi = h_info(eta[i].imag() - quantizer.offset(n + i), sigma, quantizer.spec);
    out.plus[i] = 0.5 * (hr + hi);
    out.minus[i] = 0.5 * (hr - hi);
  }
  memo = Memo{eta, sigma, quantizer.spec, quantizer.offsets, out};
  return out;
}

AmplitudeDerivatives amp_gradient_hessian(const QuantizedObservation& obs, const CVector& zeta,
                                          const CVector& atom_vec, Complex x, double sigma) {
  check_lengths(obs, zeta.size());
  const ChannelTerms t = channel_terms(obs, stack_real(zeta + atom_vec * x), sigma);
  const Matrix jac = amplitude_jacobian(atom_vec);
  AmplitudeDerivatives out;
  out.value = t.value.sum();
  out.gradient = jac.transpose() * t.d_mean.matrix();
  out.hessian = jac.transpose() * t.d2_mean.matrix().asDiagonal() * jac;
  return out;
}

AmplitudeDerivatives amp_gradient_hessian(const QuantizedObservation& obs, const CVector& zeta, double omega,
                                          Complex x, double sigma) {
  return amp_gradient_hessian(obs, zeta, atom(omega, zeta.size()), x, sigma);
}

FrequencyDerivatives freq_derivatives(const QuantizedObservation& obs, const CVector& zeta, double omega,
                                      Complex x, double sigma, const SensingModel& model) {
  check_lengths(obs, zeta.size());
  const Eigen::Index m = zeta.size();
  const CVector a0 = model.derivative(omega, m, 0);
  const Vector dmu = stack_real(model.derivative(omega, m, 1) * x);
  const Vector d2mu = stack_real(model.derivative(omega, m, 2) * x);
  const ChannelTerms t = channel_terms(obs, stack_real(zeta + a0 * x), sigma);
  FrequencyDerivatives out;
  out.value = t.value.sum();
  out.d1 = t.d_mean.matrix().dot(dmu);
  out.d2 = (t.d2_mean * dmu.array().square() + t.d_mean * d2mu.array()).sum();
  return out;
}

JointDerivatives joint_derivatives(const QuantizedObservation& obs, const CVector& zeta, double omega, Complex x,
                                   double sigma, const SensingModel& model) {
  check_lengths(obs, zeta.size());
  const Eigen::Index m = zeta.size();
  const CVector a0 = model.derivative(omega, m, 0);
  const CVector a1 = model.derivative(omega, m, 1);
  const ChannelTerms t = channel_terms(obs, stack_real(zeta + a0 * x), sigma);
  const Complex j(0.0, 1.0);
  Matrix jac(2 * m, 3);
  jac.col(0) = stack_real(a1 * x);
  jac.col(1) = stack_real(a0);
  jac.col(2) = stack_real(a0 * j);
  JointDerivatives out;
  out.value = t.value.sum();
  out.gradient = jac.transpose() * t.d_mean.matrix();
  out.hessian = jac.transpose() * t.d2_mean.matrix().asDiagonal() * jac;
  out.hessian = (0.5 * (out.hessian + out.hessian.transpose())).eval();
  // Second derivatives of the mean: ∂²μ/∂ω² = a''x, ∂²μ/∂ω∂Re x = a', ∂²μ/∂ω∂Im x = j a'.
  const Vector dl = t.d_mean.matrix();
  out.hessian(0, 0) += dl.dot(stack_real(model.derivative(omega, m, 2) * x));
  const double c1 = dl.dot(stack_real(a1)), c2 = dl.dot(stack_real(a1 * j));
  out.hessian(0, 1) += c1;
  out.hessian(1, 0) += c1;
  out.hessian(0, 2) += c2;
  out.hessian(2, 0) += c2;
  return out;
}

AmplitudeFit solve_amplitudes(const QuantizedObservation& obs, const CVector& zeta, const CMatrix& atoms,
                              double sigma, const CVector& init, int max_iter) {
  check_lengths(obs, zeta.size());
  if (atoms.rows() != zeta.size() || atoms.cols() != init.size()) {
    throw std::invalid_argument("solve_amplitudes: inconsistent dimensions");
  }
  const Matrix jac = amplitude_jacobian(atoms);
  const double tol = 1e-8 * static_cast<double>(obs.size());
  Vector theta = to_theta(init);
  AmplitudeFit fit;
  fit.x = init;
  fit.log_likelihood = safe_ll(obs, zeta + atoms * init, sigma);
  if (atoms.cols() == 0) {
    fit.converged = true;
    return fit;
  }

  for (int it = 0; it < max_iter; ++it) {
    const CVector mean = zeta + atoms * to_cvector(theta);
    const ChannelTerms t = channel_terms(obs, stack_real(mean), sigma);
    const double ll = t.value.sum();
    fit.log_likelihood = ll;
    const Vector grad = jac.transpose() * t.d_mean.matrix();
    if (grad.norm() <= tol) {
      fit.converged = true;
      break;
    }
    Matrix neg_hess = -(jac.transpose() * t.d2_mean.matrix().asDiagonal() * jac);
    Eigen::LDLT<Matrix> ldlt(neg_hess);
    Vector step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 0.0) {
      step = ldlt.solve(grad);
    } else {
      const double ridge = 1e-8 * std::max(neg_hess.trace(), 1e-300) + 1e-300;
      neg_hess.diagonal().array() += ridge;
      step = neg_hess.ldlt().solve(grad);
    }
    if (!step.allFinite()) break;

    bool accepted = false;
    double scale = 1.0;
    for (int h = 0; h <= 20; ++h, scale *= 0.5) {
      const Vector cand = theta + scale * step;
      const double cand_ll = safe_ll(obs, zeta + atoms * to_cvector(cand), sigma);
      if (cand_ll >= ll) {
        accepted = cand != theta;
        theta = cand;
        fit.log_likelihood = cand_ll;
        break;
      }
    }
    fit.iterations = it + 1;
    if (!accepted) break;
  }
  fit.x = to_cvector(theta);
  if (!fit.converged) {
    const ChannelTerms t = channel_terms(obs, stack_real(zeta + atoms * fit.x), sigma);
    fit.converged = (jac.transpose() * t.d_mean.matrix()).norm() <= tol;
  }
  return fit;
}

ScalarAmplitudeFit solve_amplitude(const QuantizedObservation& obs, const CVector& zeta, const CVector& atom_vec,
                                   double sigma, Complex init) {
  CVector x0(1);
  x0[0] = init;
  const AmplitudeFit f = solve_amplitudes(obs, zeta, atom_vec, sigma, x0);
  return {f.x[0], f.log_likelihood, f.iterations, f.converged};
}

ScalarAmplitudeFit solve_amplitude(const QuantizedObservation& obs, const CVector& zeta, double omega,
                                   double sigma, Complex init) {
  return solve_amplitude(obs, zeta, atom(omega, zeta.size()), sigma, init);
}

double solve_sigma(const QuantizedObservation& obs, const CVector& mean, double sigma_init, int max_iter) {
  if (!(sigma_init > 0.0)) throw std::invalid_argument("solve_sigma: initial sigma must be positive");
  check_lengths(obs, mean.size());
  const Vector mu = stack_real(mean);
  const double tol = 1e-9 * static_cast<double>(obs.channels());
  double sigma = sigma_init;
  for (int it = 0; it < max_iter; ++it) {
    const ChannelTerms t = channel_terms(obs, mu, sigma, true);
    const double ll = t.value.sum();
    const double g = t.d_logscale.sum();
    const double h = t.d2_logscale.sum();
    if (std::abs(g) <= tol) break;
    double step = (h < 0.0) ? -g / h : (g > 0.0 ? 1.0 : -1.0);
    step = std::clamp(step, -1.0, 1.0);
    bool accepted = false;
    for (int k = 0; k <= 20; ++k, step *= 0.5) {
      const double cand = sigma * std::exp(step);
      if (channel_terms(obs, mu, cand).value.sum() >= ll) {
        accepted = cand != sigma;
        sigma = cand;
        break;
      }
    }
    if (!accepted) break;
  }
  return sigma;
}

}  // namespace qlsed
