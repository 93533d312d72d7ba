#include "qlsed/gnomp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <unsupported/Eigen/FFT>

namespace qlsed {

namespace {

class Extractor {
 public:
  Extractor(const QuantizedObservation& obs, const GnompConfig& cfg, const SensingModel& model, double sigma,
            bool refit_sigma)
      : obs_(obs), cfg_(cfg), model_(model), sigma_(sigma), refit_sigma_(refit_sigma) {
    m_ = obs.size();
    n_ = model.signal_length(m_);
    tau_ = cfg.tau_th ? *cfg.tau_th : threshold_unknown_freq(cfg.p_fa, static_cast<long>(n_));
    max_components_ = cfg.max_components > 0 ? cfg.max_components : std::max<int>(1, static_cast<int>(n_ / 4));
    cyclic_rounds_ = refit_sigma ? cfg.cyclic_rounds_unknown_sigma : cfg.cyclic_rounds;
    max_step_ = kTwoPi / static_cast<double>(n_);
  }

  GnompResult run();

 private:
  CVector synth() const { return model_.synthesize(comps_, m_); }
  CVector atom_at(double omega) const { return model_.atom(omega, m_); }
  double ll(const CVector& mean) const { return log_likelihood(obs_, mean, sigma_); }

  void event(const std::string& kind, int k, bool accepted, double before, double after, double stat = 0.0) {
    result_.events.push_back({iteration_, kind, k, accepted, before, after, stat});
  }

  void refine_component(std::size_t k, const CVector& zeta_others, int rounds, const std::string& kind);
  void cyclic_refinement();
  void update_amplitudes();
  void refit_sigma();
  void record_order();

  const QuantizedObservation& obs_;
  const GnompConfig& cfg_;
  const SensingModel& model_;
  double sigma_;
  bool refit_sigma_;
  Eigen::Index m_ = 0, n_ = 0;
  double tau_ = 0.0;
  int max_components_ = 0;
  int cyclic_rounds_ = 0;
  double max_step_ = 0.0;
  int iteration_ = 0;
  ComponentList comps_;
  std::vector<double> stats_;
  GnompResult result_;
};

void Extractor::refine_component(std::size_t k, const CVector& zeta_others, int rounds, const std::string& kind) {
  const int idx = static_cast<int>(k);
  for (int r = 0; r < rounds; ++r) {
    SinusoidComponent& c = comps_[k];
    // Frequency: Newton step in (ω, x) jointly, since moving ω with the
    // amplitude frozen also rotates the phase. Halved once on failure, then
    // the frozen-amplitude ω step as a last resort.
    const JointDerivatives jd = joint_derivatives(obs_, zeta_others, c.omega, c.amp, sigma_, model_);
    double current = jd.value;
    bool accepted = false;
    double tried = current;
    Eigen::LDLT<Matrix3> ldlt((-jd.hessian).eval());
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 0.0) {
      Vector3 step = ldlt.solve(jd.gradient);
      if (std::abs(step[0]) > max_step_) step *= max_step_ / std::abs(step[0]);
      for (double frac : {1.0, 0.5}) {
        if (!step.allFinite()) break;
        const double w = wrap_angle(c.omega + frac * step[0]);
        const Complex x = c.amp + frac * Complex(step[1], step[2]);
        tried = ll(zeta_others + atom_at(w) * x);
        if (tried > current) {
          event(kind + "_freq", idx, true, current, tried);
          c.omega = w;
          c.amp = x;
          current = tried;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      const FrequencyDerivatives fd = freq_derivatives(obs_, zeta_others, c.omega, c.amp, sigma_, model_);
      if (fd.d2 < 0.0 && std::isfinite(fd.d1)) {
        const double step = std::clamp(-fd.d1 / fd.d2, -max_step_, max_step_);
        for (double frac : {1.0, 0.5}) {
          const double w = wrap_angle(c.omega + frac * step);
          tried = ll(zeta_others + atom_at(w) * c.amp);
          if (tried > current) {
            c.omega = w;
            current = tried;
            accepted = true;
            break;
          }
        }
      }
      event(kind + "_freq", idx, accepted, jd.value, accepted ? current : tried);
    }
    // Amplitude: one damped Newton step at the current frequency.
    CVector x0(1);
    x0[0] = c.amp;
    const AmplitudeFit fit = solve_amplitudes(obs_, zeta_others, atom_at(c.omega), sigma_, x0, 1);
    if (fit.log_likelihood > current) {
      event(kind + "_amp", idx, true, current, fit.log_likelihood);
      c.amp = fit.x[0];
    }
  }
}

void Extractor::cyclic_refinement() {
  for (int r = 0; r < cyclic_rounds_; ++r) {
    for (std::size_t k = 0; k < comps_.size(); ++k) {
      const CVector others = synth() - atom_at(comps_[k].omega) * comps_[k].amp;
      refine_component(k, others, cfg_.single_rounds, "cyclic");
    }
  }
}

void Extractor::update_amplitudes() {
  if (comps_.empty()) return;
  const auto k = static_cast<Eigen::Index>(comps_.size());
  CMatrix atoms(m_, k);
  CVector x(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    atoms.col(i) = atom_at(comps_[static_cast<std::size_t>(i)].omega);
    x[i] = comps_[static_cast<std::size_t>(i)].amp;
  }
  const CVector zero = CVector::Zero(m_);
  const double before = ll(atoms * x);
  const AmplitudeFit fit = solve_amplitudes(obs_, zero, atoms, sigma_, x);
  const bool accepted = fit.log_likelihood >= before;
  event("update", -1, accepted, before, fit.log_likelihood);
  if (accepted) {
    for (Eigen::Index i = 0; i < k; ++i) comps_[static_cast<std::size_t>(i)].amp = fit.x[i];
  }
}

void Extractor::refit_sigma() {
  if (!refit_sigma_) return;
  const CVector mean = synth();
  const double before = ll(mean);
  const double s = solve_sigma(obs_, mean, sigma_);
  const double after = log_likelihood(obs_, mean, s);
  const bool accepted = after >= before;
  event("sigma", -1, accepted, before, after, s);
  if (accepted) sigma_ = s;
}

void Extractor::record_order() {
  const int order = static_cast<int>(comps_.size());
  const double value = ll(synth());
  for (auto& p : result_.order_path) {
    if (p.order == order) {
      if (value > p.log_likelihood) {
        p.log_likelihood = value;
        p.components = comps_;
      }
      return;
    }
  }
  result_.order_path.push_back({order, value, comps_});
}

GnompResult Extractor::run() {
  const bool bic = cfg_.stop == StopRule::Bic;
  const int bic_max = cfg_.bic_max_order > 0 ? cfg_.bic_max_order : max_components_;
  const int max_iterations = 2 * max_components_ + 8;
  CVector zeta = CVector::Zero(m_);
  if (bic) record_order();
  result_.stop_reason = "iteration limit";

  for (iteration_ = 1; iteration_ <= max_iterations; ++iteration_) {
    const CVector phi = pseudo_measurements(obs_, zeta, sigma_);
    RaoGridResult grid = rao_grid(phi, zeta, sigma_, obs_.quantizer, cfg_.oversample, model_);
    IterationTrace tr;
    tr.iteration = iteration_;
    tr.max_statistic = grid.dft_max();
    tr.tau = tau_;
    tr.omega_peak = grid.omegas[grid.argmax];
    tr.sigma = sigma_;
    tr.detected = tr.max_statistic > tau_;

    const int limit = bic ? bic_max : max_components_;
    std::string stop;
    if (!bic && !tr.detected) stop = "below threshold";
    else if (static_cast<int>(comps_.size()) >= limit) stop = "component limit";
    if (cfg_.keep_spectra) tr.spectrum = std::move(grid);
    result_.iterations.push_back(std::move(tr));
    if (!stop.empty()) {
      result_.iterations.back().detected = false;
      result_.stop_reason = stop;
      break;
    }

    // Identify on the oversampled grid.
    const double omega0 = result_.iterations.back().omega_peak;
    const double before = ll(zeta);
    const ScalarAmplitudeFit x0 = solve_amplitude(obs_, zeta, atom_at(omega0), sigma_, Complex(0.0, 0.0));
    comps_.push_back({omega0, x0.x});
    stats_.push_back(result_.iterations.back().max_statistic);
    const int k = static_cast<int>(comps_.size()) - 1;
    event("identify", k, true, before, x0.log_likelihood, result_.iterations.back().max_statistic);

    refine_component(static_cast<std::size_t>(k), zeta, cfg_.single_rounds, "single");
    cyclic_refinement();
    update_amplitudes();

    SuppressionCheck sc = spurious_suppression(comps_, obs_, sigma_, tau_, cfg_.spurious_ratio, model_);
    if (sc.triggered) {
      event("suppress", static_cast<int>(sc.index), sc.removed, 0.0, 0.0, sc.statistic);
      if (sc.removed) {
        stats_.erase(stats_.begin() + static_cast<std::ptrdiff_t>(sc.index));
        cyclic_refinement();
        update_amplitudes();
      }
    }
    refit_sigma();
    zeta = synth();
    if (bic) record_order();
  }

  if (bic) {
    const int order = bic_order_select(result_.order_path, static_cast<long>(n_));
    for (const auto& p : result_.order_path) {
      if (p.order == order) {
        comps_ = p.components;
        break;
      }
    }
    stats_.resize(comps_.size(), 0.0);
    result_.stop_reason = "bic order " + std::to_string(order);
  }

  result_.components = comps_;
  result_.detection_statistic = stats_;
  result_.zeta = synth();
  result_.sigma = sigma_;
  result_.log_likelihood = ll(result_.zeta);
  return std::move(result_);
}

}  // namespace

Identification identify(const QuantizedObservation& obs, const CVector& zeta, double sigma, int oversample,
                        const SensingModel& model) {
  const CVector phi = pseudo_measurements(obs, zeta, sigma);
  Identification id;
  id.grid = rao_grid(phi, zeta, sigma, obs.quantizer, oversample, model);
  id.omega = id.grid.omegas[id.grid.argmax];
  id.amp = solve_amplitude(obs, zeta, model.atom(id.omega, zeta.size()), sigma, Complex(0.0, 0.0)).x;
  return id;
}

SuppressionCheck spurious_suppression(ComponentList& components, const QuantizedObservation& obs, double sigma,
                                      double tau, double ratio, const SensingModel& model) {
  SuppressionCheck out;
  const std::size_t m = components.size();
  if (m < 3) return out;
  const std::size_t idx = m - 2;
  if (!(std::abs(components[idx].amp) < ratio * std::abs(components[m - 1].amp))) return out;
  out.triggered = true;
  out.index = idx;
  const Eigen::Index len = obs.size();
  const CVector a = model.atom(components[idx].omega, len);
  const CVector zeta_r = model.synthesize(components, len) - a * components[idx].amp;
  const CVector phi = pseudo_measurements(obs, zeta_r, sigma);
  out.statistic = rao_statistic(phi, zeta_r, a, sigma, obs.quantizer).value;
  if (out.statistic <= tau) {
    components.erase(components.begin() + static_cast<std::ptrdiff_t>(idx));
    out.removed = true;
  }
  return out;
}

int bic_order_select(const std::vector<OrderPoint>& path, long n) {
  if (path.empty()) return 0;
  const double pen = 5.0 * std::log(static_cast<double>(n));
  int best = path.front().order;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& p : path) {
    const double cost = -2.0 * p.log_likelihood + pen * p.order;
    if (cost < best_cost || (cost == best_cost && p.order < best)) {
      best_cost = cost;
      best = p.order;
    }
  }
  return best;
}

double periodogram_noise_variance(const CVector& samples) {
  const auto len = static_cast<std::size_t>(samples.size());
  if (len == 0) throw std::invalid_argument("periodogram_noise_variance: empty record");
  std::vector<Complex> in(samples.data(), samples.data() + len), out;
  Eigen::FFT<double> fft;
  fft.fwd(out, in);
  std::vector<double> power(len);
  for (std::size_t i = 0; i < len; ++i) power[i] = std::norm(out[i]) / static_cast<double>(len);
  std::sort(power.begin(), power.end());
  const double med = (len % 2) ? power[len / 2] : 0.5 * (power[len / 2 - 1] + power[len / 2]);
  if (!(med > 0.0)) throw std::invalid_argument("periodogram_noise_variance: degenerate record");
  return med / std::numbers::ln2;
}

GnompResult extract_spectrum(const QuantizedObservation& obs, const GnompConfig& config, const SensingModel& model) {
  if (config.sigma_mode == SigmaMode::Unknown) return sigma_unknown_wrapper(obs, config, model);
  if (!(config.sigma > 0.0)) throw std::invalid_argument("extract_spectrum: sigma must be positive");
  if (config.oversample < 1 || config.single_rounds < 0 || config.cyclic_rounds < 0) {
    throw std::invalid_argument("extract_spectrum: invalid configuration");
  }
  if (!config.tau_th && !(config.p_fa > 0.0 && config.p_fa < 1.0)) {
    throw std::invalid_argument("extract_spectrum: p_fa must lie in (0, 1)");
  }
  if (obs.lower.size() != obs.upper.size() || obs.size() == 0) {
    throw std::invalid_argument("extract_spectrum: malformed observation");
  }
  Extractor ex(obs, config, model, config.sigma, false);
  return ex.run();
}

GnompResult sigma_unknown_wrapper(const QuantizedObservation& obs, const GnompConfig& config,
                                  const SensingModel& model) {
  const bool has_offsets = obs.quantizer.offsets.size() > 0 && obs.quantizer.offsets.cwiseAbs().maxCoeff() > 0.0;
  if (obs.quantizer.spec.bit_depth == 1 && !has_offsets) {
    throw std::invalid_argument("noise level is not identifiable from zero-threshold one-bit samples");
  }
  double sigma = std::sqrt(periodogram_noise_variance(obs.output));
  // Sign records carry no amplitude scale; refine against the noise-only model.
  if (has_offsets) sigma = solve_sigma(obs, CVector::Zero(obs.size()), sigma);
  GnompConfig cfg = config;
  cfg.sigma_mode = SigmaMode::Known;
  cfg.sigma = sigma;
  Extractor ex(obs, cfg, model, sigma, true);
  return ex.run();
}

}  // namespace qlsed
