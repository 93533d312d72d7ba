#pragma once

// Interval-censored Gaussian log-likelihood of a quantized record and its
// derivatives with respect to the channel means, the sinusoid amplitude and
// frequency, and the noise scale.

#include <optional>

#include "qlsed/quantizer.hpp"
#include "qlsed/special_functions.hpp"
#include "qlsed/types.hpp"

namespace qlsed {

/// a(ω)_n = exp(jnω), n = 0..n_samples-1.
CVector atom(double omega, Eigen::Index n_samples);

/// d^order a / dω^order = (jn)^order a(ω).
CVector atom_derivative(double omega, Eigen::Index n_samples, int order);

/// Maps a frequency to the measured atom: a(ω) itself, or Φ a(ω) when a
/// compressive sensing matrix Φ (M x N) is present.
class SensingModel {
 public:
  SensingModel() = default;
  explicit SensingModel(CMatrix phi) : phi_(std::move(phi)) {}

  bool compressive() const { return phi_.has_value(); }
  const CMatrix& matrix() const { return *phi_; }

  /// Length of the underlying sinusoid for a record of `measurements` samples.
  Eigen::Index signal_length(Eigen::Index measurements) const {
    return phi_ ? phi_->cols() : measurements;
  }

  CVector atom(double omega, Eigen::Index measurements) const { return derivative(omega, measurements, 0); }
  CVector derivative(double omega, Eigen::Index measurements, int order) const;

  /// Σ_k atom(ω_k) x_k.
  CVector synthesize(const ComponentList& components, Eigen::Index measurements) const;

 private:
  std::optional<CMatrix> phi_;
};

/// Number of channel log-probabilities that had to be clamped since start-up.
long clamped_cell_count();

/// Per-channel log-likelihood L and its derivatives with respect to the
/// channel mean μ and to t = log(σ/√2).
struct ChannelTerms {
  Array value;
  Array d_mean;
  Array d2_mean;
  Array d_logscale;
  Array d2_logscale;
};

ChannelTerms channel_terms(const QuantizedObservation& obs, const Vector& mean, double sigma,
                           bool with_scale = false);

double log_likelihood(const QuantizedObservation& obs, const CVector& mean, double sigma);

double log_likelihood(const QuantizedObservation& obs, const CVector& zeta, const ComponentList& components,
                      double sigma, const SensingModel& model = {});

/// φ_n = (s ∂L/∂μ) at μ = ζ per channel, s = σ/√2; equals (y - ζ)/s unquantized.
CVector pseudo_measurements(const QuantizedObservation& obs, const CVector& zeta, double sigma);

/// Σ over cells of (φ(b)-φ(a))² / (Φ(b)-Φ(a)) for a real channel of mean x.
double h_info(double x, double sigma, const QuantizerSpec& spec);

struct InfoDensity {
  Vector plus;   // (h(Re η) + h(Im η)) / 2
  Vector minus;  // (h(Re η) - h(Im η)) / 2
};

InfoDensity h_plus_minus(const CVector& eta, double sigma, const ChannelQuantizer& quantizer);

struct AmplitudeDerivatives {
  double value = 0.0;
  Vector2 gradient = Vector2::Zero();
  Matrix2 hessian = Matrix2::Zero();
};

/// Derivatives with respect to [Re x, Im x] of the likelihood of ζ + atom·x.
AmplitudeDerivatives amp_gradient_hessian(const QuantizedObservation& obs, const CVector& zeta,
                                          const CVector& atom_vec, Complex x, double sigma);
AmplitudeDerivatives amp_gradient_hessian(const QuantizedObservation& obs, const CVector& zeta, double omega,
                                          Complex x, double sigma);

struct FrequencyDerivatives {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

FrequencyDerivatives freq_derivatives(const QuantizedObservation& obs, const CVector& zeta, double omega,
                                      Complex x, double sigma, const SensingModel& model = {});

struct JointDerivatives {
  double value = 0.0;
  Vector3 gradient = Vector3::Zero();  // (ω, Re x, Im x)
  Matrix3 hessian = Matrix3::Zero();
};

JointDerivatives joint_derivatives(const QuantizedObservation& obs, const CVector& zeta, double omega, Complex x,
                                   double sigma, const SensingModel& model = {});

struct AmplitudeFit {
  CVector x;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton ascent on the concave amplitude likelihood of ζ + A x where
/// the columns of A are atoms. Gradient tolerance 1e-8 · (record length).
AmplitudeFit solve_amplitudes(const QuantizedObservation& obs, const CVector& zeta, const CMatrix& atoms,
                              double sigma, const CVector& init, int max_iter = 50);

struct ScalarAmplitudeFit {
  Complex x;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
};

ScalarAmplitudeFit solve_amplitude(const QuantizedObservation& obs, const CVector& zeta, const CVector& atom_vec,
                                   double sigma, Complex init = {});
ScalarAmplitudeFit solve_amplitude(const QuantizedObservation& obs, const CVector& zeta, double omega,
                                   double sigma, Complex init = {});

/// Maximizes the likelihood over σ with the channel means fixed; Newton in
/// log σ with steps capped at one unit.
double solve_sigma(const QuantizedObservation& obs, const CVector& mean, double sigma_init, int max_iter = 50);

}  // namespace qlsed
