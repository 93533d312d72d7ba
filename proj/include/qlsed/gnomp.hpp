#pragma once

// Greedy CFAR-gated sinusoid extraction from quantized records with Newton
// refinement of every detected component.

#include <optional>
#include <string>
#include <vector>

#include "qlsed/rao.hpp"

namespace qlsed {

enum class StopRule { Cfar, Bic };
enum class SigmaMode { Known, Unknown };

struct GnompConfig {
  double p_fa = 0.01;
  std::optional<double> tau_th;  // overrides the threshold derived from p_fa
  int oversample = 4;
  int single_rounds = 1;
  int cyclic_rounds = 3;
  int cyclic_rounds_unknown_sigma = 4;
  double spurious_ratio = 0.5;
  int max_components = 0;  // 0: a quarter of the signal length
  StopRule stop = StopRule::Cfar;
  int bic_max_order = 0;   // 0: max_components
  SigmaMode sigma_mode = SigmaMode::Known;
  double sigma = 1.0;      // used when sigma_mode is Known
  bool keep_spectra = false;
};

struct IterationTrace {
  int iteration = 0;
  double max_statistic = 0.0;  // on the Nyquist grid
  double tau = 0.0;
  double omega_peak = 0.0;     // oversampled-grid argmax
  double sigma = 0.0;
  bool detected = false;
  std::optional<RaoGridResult> spectrum;
};

struct TraceEvent {
  int iteration = 0;
  std::string kind;  // identify, single, cyclic, update, suppress, sigma
  int component = -1;
  bool accepted = false;
  double ll_before = 0.0;
  double ll_after = 0.0;
  double statistic = 0.0;
};

struct OrderPoint {
  int order = 0;
  double log_likelihood = 0.0;
  ComponentList components;
};

struct GnompResult {
  ComponentList components;
  std::vector<double> detection_statistic;  // statistic at each component's detection
  CVector zeta;
  double sigma = 0.0;
  double log_likelihood = 0.0;
  std::vector<IterationTrace> iterations;
  std::vector<TraceEvent> events;
  std::vector<OrderPoint> order_path;  // filled by the BIC rule
  std::string stop_reason;
};

GnompResult extract_spectrum(const QuantizedObservation& obs, const GnompConfig& config,
                             const SensingModel& model = {});

struct Identification {
  double omega = 0.0;
  Complex amp;
  RaoGridResult grid;
};

/// Oversampled-grid argmax of the Rao statistic, then the amplitude MLE there.
Identification identify(const QuantizedObservation& obs, const CVector& zeta, double sigma, int oversample,
                        const SensingModel& model = {});

struct SuppressionCheck {
  bool triggered = false;
  bool removed = false;
  std::size_t index = 0;
  double statistic = 0.0;
};

/// Re-tests the second-to-last component against the others when it is much
/// weaker than the last one; removes it when its statistic is at most tau.
SuppressionCheck spurious_suppression(ComponentList& components, const QuantizedObservation& obs, double sigma,
                                      double tau, double ratio, const SensingModel& model = {});

/// Order minimizing -2 ll + 5 K ln N over the supplied path.
int bic_order_select(const std::vector<OrderPoint>& path, long n);

/// Median periodogram bin of the reconstructed record divided by ln 2.
double periodogram_noise_variance(const CVector& samples);

/// Unknown noise level: initial estimate, then extract_spectrum with σ re-fit
/// after every joint amplitude update. Rejects zero-threshold one-bit records.
GnompResult sigma_unknown_wrapper(const QuantizedObservation& obs, const GnompConfig& config,
                                  const SensingModel& model = {});

}  // namespace qlsed
