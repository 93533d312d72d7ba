#pragma once

// Fisher information of quantized sinusoid observations, Cramér-Rao bounds
// and the quantization SNR loss.

#include <string>
#include <vector>

#include "qlsed/likelihood.hpp"

namespace qlsed {

struct FimResult {
  Matrix matrix;
  Matrix inverse;  // empty when singular
  double crb_trace = 0.0;
  bool singular = false;
  std::vector<std::string> labels;
};

/// 2x2 information for θ = [Re x, Im x] with mean ζ + atom·x.
FimResult fim_amplitude(const CVector& atom_vec, Complex x, const CVector& zeta, double sigma,
                        const ChannelQuantizer& quantizer);
FimResult fim_amplitude(double omega, Complex x, const CVector& zeta, double sigma,
                        const ChannelQuantizer& quantizer);

enum class FimParameters { FrequencyAndAmplitude, AmplitudeOnly };

/// (2/σ²) Jᵀ Λ J with Λ = diag(h(μ)) over the stacked channels, μ = ζ + Σ a(ω_k) x_k.
/// Per component the parameter order is (ω, Re x, Im x), or (Re x, Im x).
FimResult fim_general(const ComponentList& components, const CVector& zeta, double sigma,
                      const ChannelQuantizer& quantizer, const SensingModel& model = {},
                      FimParameters params = FimParameters::FrequencyAndAmplitude);

/// Sum of the frequency diagonal of the inverse of a FrequencyAndAmplitude FIM.
double crb_frequency_trace(const FimResult& fim);

/// 10 log10(aᴴa / aᴴ diag(h₊(ζ)) a).
double snr_loss(const CVector& atom_vec, const CVector& zeta, double sigma, const ChannelQuantizer& quantizer);
double snr_loss(double omega, const CVector& zeta, double sigma, const ChannelQuantizer& quantizer);

/// One-bit SNR loss with the two-branch approximation of h split at √(8/π)σ.
double snr_loss_1bit_approx(const CVector& zeta, double sigma);

}  // namespace qlsed
