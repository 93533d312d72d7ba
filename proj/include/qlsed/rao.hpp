#pragma once

// Rao score test for a sinusoid on top of a known threshold signal, its grid
// (FFT) evaluation, CFAR thresholds and asymptotic detection predictions.

#include "qlsed/fim.hpp"
#include "qlsed/likelihood.hpp"

namespace qlsed {

struct RaoValue {
  double value = 0.0;
  bool degenerate = false;  // the 2x2 information was (numerically) rank deficient
};

/// [P |aᴴφ|² - Re(Q (aᴴφ)²)] / (P² - |Q|²) with P = aᴴ diag(h₊(ζ)) a, Q = aᵀ diag(h₋(ζ)) a.
RaoValue rao_statistic(const CVector& phi, const CVector& zeta, const CVector& atom_vec, double sigma,
                       const ChannelQuantizer& quantizer);
RaoValue rao_statistic(const CVector& phi, const CVector& zeta, double omega, double sigma,
                       const ChannelQuantizer& quantizer);

/// |aᴴφ|² / (aᴴ diag(h₊(ζ)) a).
double rao_statistic_simplified(const CVector& phi, const CVector& zeta, const CVector& atom_vec, double sigma,
                                const ChannelQuantizer& quantizer);
double rao_statistic_simplified(const CVector& phi, const CVector& zeta, double omega, double sigma,
                                const ChannelQuantizer& quantizer);

struct RaoGridResult {
  Vector omegas;  // 2πg/(γ_os N), g = 0..γ_os N - 1
  Vector values;
  int oversample = 1;
  Eigen::Index argmax = 0;
  double max_value = 0.0;

  /// Largest value over the Nyquist subgrid (every oversample-th point),
  /// lowest index on ties; returns the oversampled index.
  Eigen::Index dft_argmax() const;
  double dft_max() const { return values[dft_argmax()]; }
};

/// Statistic on the oversampled grid. With the default (uniform) model both
/// frequency-dependent terms come from zero-padded FFTs; with a compressive
/// model the atoms are evaluated densely.
RaoGridResult rao_grid(const CVector& phi, const CVector& zeta, double sigma, const ChannelQuantizer& quantizer,
                       int oversample, const SensingModel& model = {});

/// Same statistic evaluated one grid point at a time through rao_statistic.
RaoGridResult rao_grid_direct(const CVector& phi, const CVector& zeta, double sigma,
                              const ChannelQuantizer& quantizer, int oversample, const SensingModel& model = {});

/// τ = -2 ln(1 - (1 - p_fa)^(1/n)).
double threshold_unknown_freq(double p_fa, long n);
/// γ = -2 ln p_fa.
double threshold_known_freq(double p_fa);

/// |sin(NΔ/2) / (N sin(Δ/2))|² with Δ = ω - ω_g wrapped to [-π, π].
double grid_mismatch_factor(double omega, double grid_omega, long n);

/// Nearest Nyquist-grid frequency to ω in wrap-around distance.
double nearest_dft_frequency(double omega, long n);

/// (2/σ²)(P|x|² + Re(Q x²)) at the null ζ, times β_g when a grid frequency is given.
double noncentrality(const CVector& atom_vec, Complex x, const CVector& zeta, double sigma,
                     const ChannelQuantizer& quantizer, double mismatch_factor = 1.0);
double noncentrality(double omega, Complex x, const CVector& zeta, double sigma, const ChannelQuantizer& quantizer,
                     std::optional<double> grid_freq = std::nullopt);

/// Q_1(√λ, √threshold) with the known- or unknown-frequency threshold.
double predict_pd(double lambda, double p_fa, long n, bool known_freq);

struct TargetPrediction {
  double lambda = 0.0;
  double p_d = 0.0;
  double snr_loss_db = 0.0;
};

/// Per-target detection probability with every other component treated as a
/// perfectly known threshold and the target at its nearest Nyquist bin.
std::vector<TargetPrediction> predict_targets(const ComponentList& truth, double sigma,
                                              const ChannelQuantizer& quantizer, double p_fa, Eigen::Index measurements,
                                              const SensingModel& model = {});

/// Product of the per-target probabilities, an upper bound on detecting all.
double predict_pd_all(const std::vector<TargetPrediction>& targets);

}  // namespace qlsed
