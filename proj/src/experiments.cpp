#include "qlsed/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qlsed {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags for derive_seed's last argument.
constexpr std::uint64_t kTruthStream = 0;
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kSceneStream = 2;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

CVector complex_noise(std::mt19937_64& rng, Eigen::Index n, double sigma2) {
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5 * sigma2));
  CVector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = nd(rng);
    const double im = nd(rng);
    w[i] = Complex(re, im);
  }
  return w;
}

// Entries with independent standard normal real and imaginary parts.
CMatrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  CMatrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double re = nd(rng);
      const double im = nd(rng);
      m(r, c) = Complex(re, im);
    }
  }
  return m;
}

// Complex thresholds whose I and Q parts are picked from 8 equally spaced
// values on [-1, 1].
CVector signed_thresholds(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_int_distribution<int> pick(0, 7);
  CVector h(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = -1.0 + 2.0 * pick(rng) / 7.0;
    const double im = -1.0 + 2.0 * pick(rng) / 7.0;
    h[i] = Complex(re, im);
  }
  return h;
}

void validate(const ExperimentSpec& spec) {
  if (spec.n < 2) throw std::invalid_argument("experiment: n must be >= 2");
  if (spec.k < 0) throw std::invalid_argument("experiment: k must be >= 0");
  if (spec.trials < 0) throw std::invalid_argument("experiment: trials must be >= 0");
  if (spec.bits.empty() || spec.p_fa.empty()) throw std::invalid_argument("experiment: bits and p_fa must be non-empty");
  if (spec.k > 0 && spec.snr_db.empty() && spec.sweep_snr_db.empty()) {
    throw std::invalid_argument("experiment: no SNR given");
  }
  if (spec.snr_db.size() > 1 && static_cast<int>(spec.snr_db.size()) != spec.k) {
    throw std::invalid_argument("experiment: snr_db must have one entry or k entries");
  }
  if (spec.snr_db.empty() && spec.sweep_target != 0 && spec.k > 1) {
    throw std::invalid_argument("experiment: non-swept targets need snr_db");
  }
  if (!spec.frequencies.empty() && static_cast<int>(spec.frequencies.size()) != spec.k) {
    throw std::invalid_argument("experiment: frequencies must have k entries");
  }
  if (spec.sweep_target < 0 || spec.sweep_target > spec.k) {
    throw std::invalid_argument("experiment: sweep_target out of range");
  }
  if (!(spec.sigma2 > 0.0)) throw std::invalid_argument("experiment: sigma2 must be positive");
  if (spec.oversample < 1) throw std::invalid_argument("experiment: oversample must be >= 1");
  if (spec.measurement == Measurement::Compressive && spec.compressive_m < 1) {
    throw std::invalid_argument("experiment: compressive measurement needs compressive_m >= 1");
  }
  if (spec.measurement == Measurement::Signed) {
    for (int b : spec.bits) {
      if (b != 1) throw std::invalid_argument("experiment: signed measurements are one-bit");
    }
  }
  if (spec.scenario == "rao_single") {
    if (spec.k != 1) throw std::invalid_argument("experiment: rao_single needs k = 1");
    if (spec.measurement != Measurement::Uniform) {
      throw std::invalid_argument("experiment: rao_single supports uniform measurements only");
    }
  } else if (spec.scenario != "gnomp") {
    throw std::invalid_argument("experiment: unknown scenario '" + spec.scenario + "'");
  }
  if (spec.full_scale_rule == "full_scale") {
    if (!(spec.full_scale > 0.0)) throw std::invalid_argument("experiment: full_scale must be positive");
  } else if (spec.full_scale_rule != "paper_max_rule") {
    throw std::invalid_argument("experiment: unknown full_scale_rule");
  }
  for (double p : spec.p_fa) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("experiment: p_fa must lie in (0, 1)");
  }
}

// Target whose detection is summarized: the swept one, else the weakest.
std::size_t focus_target(const ExperimentSpec& spec, const ComponentList& truth) {
  if (spec.sweep_target > 0) return static_cast<std::size_t>(spec.sweep_target - 1);
  std::size_t best = 0;
  for (std::size_t i = 1; i < truth.size(); ++i) {
    if (std::abs(truth[i].amp) < std::abs(truth[best].amp)) best = i;
  }
  return best;
}

QuantizerSpec design_quantizer(const ExperimentSpec& spec, int bits, const ComponentList& truth, double sigma) {
  if (bits == kInfiniteBits) return make_quantizer(kInfiniteBits, 1.0);
  if (spec.full_scale_rule == "full_scale") return make_quantizer(bits, spec.full_scale);
  // A compressive row mixes N atom entries with unit-variance I/Q weights, so
  // each amplitude reaches a measurement scaled by sqrt(2N) on average.
  const double gain =
      spec.measurement == Measurement::Compressive ? std::sqrt(2.0 * static_cast<double>(spec.n)) : 1.0;
  std::vector<double> amps;
  for (const auto& c : truth) amps.push_back(gain * std::abs(c.amp));
  if (spec.scenario == "rao_single") amps.push_back(std::abs(spec.threshold_amp));
  return make_quantizer(bits, design_full_scale(amps, sigma));
}

std::string describe_components(const ComponentList& comps) {
  std::ostringstream os;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    os << "  [" << i << "] omega=" << fmt(comps[i].omega) << " amp=" << fmt(comps[i].amp.real())
       << (comps[i].amp.imag() < 0 ? "" : "+") << fmt(comps[i].amp.imag()) << "j |amp|=" << fmt(std::abs(comps[i].amp))
       << "\n";
  }
  return os.str();
}

std::string describe_run(const GnompResult& r) {
  std::ostringstream os;
  for (const auto& it : r.iterations) {
    os << "  iter " << it.iteration << ": max_stat=" << fmt(it.max_statistic) << " (" << fmt(db20(it.max_statistic))
       << " dB) tau=" << fmt(it.tau) << " peak=" << fmt(it.omega_peak) << " sigma=" << fmt(it.sigma)
       << (it.detected ? " detected" : " stop") << "\n";
  }
  for (const auto& e : r.events) {
    os << "  event iter=" << e.iteration << " " << e.kind << " comp=" << e.component
       << (e.accepted ? " accepted" : " rejected") << " ll " << fmt(e.ll_before) << " -> " << fmt(e.ll_after);
    if (e.statistic != 0.0) os << " stat=" << fmt(e.statistic);
    os << "\n";
  }
  os << "  stop: " << r.stop_reason << ", sigma=" << fmt(r.sigma) << ", ll=" << fmt(r.log_likelihood) << "\n";
  return os.str();
}

struct Scene {
  QuantizedObservation obs;
  SensingModel model;
  ChannelQuantizer quantizer;
  CVector zeta;  // known threshold signal (rao_single), zero otherwise
};

Scene simulate(const ExperimentSpec& spec, const CellSpec& cell, const ComponentList& truth, long trial) {
  const double sigma = std::sqrt(spec.sigma2);
  std::mt19937_64 scene_rng(derive_seed(spec.seed, static_cast<std::uint64_t>(trial), kSceneStream));
  std::mt19937_64 noise_rng(derive_seed(spec.seed, static_cast<std::uint64_t>(trial), kNoiseStream));
  Scene s;
  if (spec.measurement == Measurement::Compressive) {
    s.model = SensingModel(gaussian_matrix(scene_rng, spec.compressive_m, spec.n));
  }
  const Eigen::Index m = spec.measurement == Measurement::Compressive ? spec.compressive_m : spec.n;
  s.zeta = CVector::Zero(m);
  if (spec.scenario == "rao_single") s.zeta = spec.threshold_amp * atom(spec.threshold_omega, m);
  const CVector clean = s.zeta + s.model.synthesize(truth, m);
  const CVector y = clean + complex_noise(noise_rng, m, spec.sigma2);
  if (spec.measurement == Measurement::Signed) {
    const CVector h = signed_thresholds(scene_rng, m);
    s.obs = quantize_signed(y, h);
  } else {
    s.obs = quantize_complex(y, design_quantizer(spec, cell.bits, truth, sigma));
  }
  s.quantizer = s.obs.quantizer;
  return s;
}

// Matches estimates to the truth with the π/N wrap-around rule.
void score(const ExperimentSpec& spec, const ComponentList& truth, const ComponentList& est, TrialRecord& rec) {
  const double radius = std::numbers::pi / static_cast<double>(spec.n);
  rec.k_hat = static_cast<int>(est.size());
  rec.overestimate = rec.k_hat > spec.k;
  rec.false_alarms = 0;
  for (const auto& e : est) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& t : truth) nearest = std::min(nearest, wrap_distance(e.omega, t.omega));
    if (nearest > radius) ++rec.false_alarms;
  }
  rec.detected.assign(truth.size(), false);
  rec.freq_error.assign(truth.size(), kNaN);
  rec.amp_error.assign(truth.size(), kNaN);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t which = 0;
    for (std::size_t j = 0; j < est.size(); ++j) {
      const double d = wrap_distance(est[j].omega, truth[i].omega);
      if (d < best) {
        best = d;
        which = j;
      }
    }
    if (best <= radius) {
      rec.detected[i] = true;
      rec.freq_error[i] = best;
      rec.amp_error[i] = std::norm(est[which].amp - truth[i].amp);
    }
  }
}

void theory_columns(const ExperimentSpec& spec, const CellSpec& cell, const ComponentList& truth, const Scene& s,
                    TrialRecord& rec) {
  const double sigma = std::sqrt(spec.sigma2);
  const Eigen::Index m = s.obs.size();
  if (truth.empty()) return;
  const FimResult fim = fim_general(truth, s.zeta, sigma, s.quantizer, s.model);
  if (!fim.singular) {
    double f = 0.0, a = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const auto b = static_cast<Eigen::Index>(3 * i);
      f += fim.inverse(b, b);
      a += fim.inverse(b + 1, b + 1) + fim.inverse(b + 2, b + 2);
    }
    rec.crb_freq = f / static_cast<double>(truth.size());
    rec.crb_amp = a / static_cast<double>(truth.size());
  } else {
    rec.crb_freq = rec.crb_amp = std::numeric_limits<double>::infinity();
  }
  const std::size_t focus = focus_target(spec, truth);
  if (spec.scenario == "rao_single") {
    const CVector a = atom(truth[0].omega, m);
    const double beta = grid_mismatch_factor(truth[0].omega, nearest_dft_frequency(truth[0].omega, spec.n), spec.n);
    const double lam = noncentrality(a, truth[0].amp, s.zeta, sigma, s.quantizer, beta);
    rec.pd_predicted = predict_pd(lam, cell.p_fa, spec.n, false);
    rec.snr_loss_db = snr_loss(a, s.zeta, sigma, s.quantizer);
    return;
  }
  // Oracle prediction: every other target is a perfectly known threshold.
  const auto pred = predict_targets(truth, sigma, s.quantizer, cell.p_fa, m, s.model);
  rec.pd_predicted = pred[focus].p_d;
  rec.snr_loss_db = pred[focus].snr_loss_db;
}

TrialRecord run_rao_single(const ExperimentSpec& spec, const CellSpec& cell, const ComponentList& truth,
                           const Scene& s, TrialRecord rec) {
  const double sigma = std::sqrt(spec.sigma2);
  const CVector phi = pseudo_measurements(s.obs, s.zeta, sigma);
  const RaoGridResult grid = rao_grid(phi, s.zeta, sigma, s.quantizer, 1);
  const double tau = threshold_unknown_freq(cell.p_fa, spec.n);
  const double target_bin = nearest_dft_frequency(truth[0].omega, spec.n);
  const double peak = grid.omegas[grid.argmax];
  const bool crossed = grid.max_value > tau;
  const bool right_bin = wrap_distance(peak, target_bin) < 0.5 * kTwoPi / static_cast<double>(spec.n);
  // Detection is scored in the target's own cell, the event the Q1
  // prediction describes; a crossing elsewhere counts as a false alarm.
  const auto cell_index =
      static_cast<Eigen::Index>(std::lround(target_bin * static_cast<double>(spec.n) / kTwoPi)) % spec.n;
  rec.k_hat = crossed ? 1 : 0;
  rec.overestimate = false;
  rec.false_alarms = crossed && !right_bin ? 1 : 0;
  rec.detected = {grid.values[cell_index] > tau};
  rec.freq_error = {kNaN};
  rec.amp_error = {kNaN};
  if (rec.detected[0]) {
    rec.freq_error[0] = wrap_distance(target_bin, truth[0].omega);
    const auto fit = solve_amplitude(s.obs, s.zeta, target_bin, sigma);
    rec.amp_error[0] = std::norm(fit.x - truth[0].amp);
  }
  if (rec.traced) {
    std::ostringstream os;
    os << "  rao max=" << fmt(grid.max_value) << " at " << fmt(peak) << ", tau=" << fmt(tau) << ", target bin "
       << fmt(target_bin) << (rec.detected[0] ? " detected" : " missed") << "\n";
    rec.trace += os.str();
  }
  return rec;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer applied to a running mix of the three words.
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ a) ^ (b * 0xD1B54A32D192ED03ULL));
}

std::vector<CellSpec> expand_cells(const ExperimentSpec& spec) {
  std::vector<CellSpec> cells;
  const bool sweep = !spec.sweep_snr_db.empty();
  const std::size_t n_sweep = sweep ? spec.sweep_snr_db.size() : 1;
  for (int b : spec.bits) {
    for (double p : spec.p_fa) {
      for (std::size_t s = 0; s < n_sweep; ++s) {
        CellSpec c;
        c.index = cells.size();
        c.bits = b;
        c.p_fa = p;
        c.has_sweep = sweep;
        c.sweep_snr_db = sweep ? spec.sweep_snr_db[s] : 0.0;
        cells.push_back(c);
      }
    }
  }
  return cells;
}

ComponentList draw_truth(const ExperimentSpec& spec, const CellSpec& cell, long trial) {
  std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(trial), kTruthStream));
  std::uniform_real_distribution<double> uni(0.0, kTwoPi);
  const auto k = static_cast<std::size_t>(spec.k);
  std::vector<double> omegas = spec.frequencies;
  if (omegas.empty() && k > 0) {
    const double min_gap = spec.min_separation * kTwoPi / static_cast<double>(spec.n);
    omegas.resize(k);
    bool ok = false;
    for (int attempt = 0; attempt < 100000 && !ok; ++attempt) {
      for (auto& w : omegas) w = uni(rng);
      ok = true;
      for (std::size_t i = 0; i < k && ok; ++i) {
        for (std::size_t j = i + 1; j < k && ok; ++j) ok = wrap_distance(omegas[i], omegas[j]) >= min_gap;
      }
    }
    if (!ok) throw std::invalid_argument("draw_truth: cannot place frequencies with the requested separation");
  }
  ComponentList truth;
  for (std::size_t i = 0; i < k; ++i) {
    double snr = spec.snr_db.empty() ? 0.0 : (spec.snr_db.size() == 1 ? spec.snr_db[0] : spec.snr_db[i]);
    if (cell.has_sweep && (spec.sweep_target == 0 || static_cast<std::size_t>(spec.sweep_target - 1) == i)) {
      snr = cell.sweep_snr_db;
    }
    const double mag = std::sqrt(spec.sigma2 * from_db10(snr) / static_cast<double>(spec.n));
    const double phase = uni(rng);
    truth.push_back({wrap_angle(omegas[i]), std::polar(mag, phase)});
  }
  return truth;
}

TrialRecord run_trial(const ExperimentSpec& spec, const CellSpec& cell, long trial) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord rec;
  rec.cell = cell.index;
  rec.trial = trial;
  rec.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(trial), kTruthStream);
  rec.traced = trial < spec.trace_trials;

  const ComponentList truth = draw_truth(spec, cell, trial);
  const Scene s = simulate(spec, cell, truth, trial);
  theory_columns(spec, cell, truth, s, rec);
  if (rec.traced) rec.trace = "trial " + std::to_string(trial) + "\n truth:\n" + describe_components(truth);

  if (spec.scenario == "rao_single") {
    rec = run_rao_single(spec, cell, truth, s, std::move(rec));
  } else {
    GnompConfig cfg;
    cfg.p_fa = cell.p_fa;
    cfg.oversample = spec.oversample;
    cfg.stop = spec.stop;
    cfg.sigma_mode = spec.sigma_mode;
    cfg.sigma = std::sqrt(spec.sigma2);
    const GnompResult r = extract_spectrum(s.obs, cfg, s.model);
    score(spec, truth, r.components, rec);
    if (rec.traced) rec.trace += " run:\n" + describe_run(r) + " estimates:\n" + describe_components(r.components);
  }
  rec.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  const std::vector<CellSpec> cells = expand_cells(spec);
  ExperimentResult out;
  const std::size_t jobs = cells.size() * static_cast<std::size_t>(spec.trials);
  out.trials.resize(jobs);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs) return;
      const std::size_t c = j / static_cast<std::size_t>(spec.trials);
      const long t = static_cast<long>(j % static_cast<std::size_t>(spec.trials));
      try {
        out.trials[j] = run_trial(spec, cells[c], t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(jobs);
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(spec.threads, static_cast<int>(std::max<std::size_t>(jobs, 1))));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& cell : cells) {
    CellAggregate agg;
    agg.cell = cell;
    agg.trials = spec.trials;
    if (spec.trials == 0) {
      out.aggregates.push_back(agg);
      continue;
    }
    long fa = 0, oe = 0, swept = 0, all = 0, mse_n = 0;
    double det_sum = 0.0, f_mse = 0.0, a_mse = 0.0, f_crb = 0.0, a_crb = 0.0, pd_pred = 0.0, loss = 0.0, khat = 0.0;
    const std::size_t base = cell.index * static_cast<std::size_t>(spec.trials);
    for (long t = 0; t < spec.trials; ++t) {
      const TrialRecord& r = out.trials[base + static_cast<std::size_t>(t)];
      fa += r.false_alarms > 0;
      oe += r.overestimate;
      khat += r.k_hat;
      f_crb += r.crb_freq;
      a_crb += r.crb_amp;
      pd_pred += r.pd_predicted;
      loss += r.snr_loss_db;
      if (r.detected.empty()) continue;
      const ComponentList truth = draw_truth(spec, cell, t);
      swept += r.detected[focus_target(spec, truth)];
      const long hits = std::count(r.detected.begin(), r.detected.end(), true);
      det_sum += static_cast<double>(hits) / static_cast<double>(r.detected.size());
      if (hits == static_cast<long>(r.detected.size())) {
        ++all;
        ++mse_n;
        double f = 0.0, a = 0.0;
        for (std::size_t i = 0; i < r.detected.size(); ++i) {
          f += r.freq_error[i] * r.freq_error[i];
          a += r.amp_error[i];
        }
        f_mse += f / static_cast<double>(r.detected.size());
        a_mse += a / static_cast<double>(r.detected.size());
      }
    }
    const double n = static_cast<double>(spec.trials);
    agg.p_fa_measured = static_cast<double>(fa) / n;
    agg.p_oe_measured = static_cast<double>(oe) / n;
    agg.pd_swept = spec.k > 0 ? static_cast<double>(swept) / n : kNaN;
    agg.pd_all = spec.k > 0 ? static_cast<double>(all) / n : kNaN;
    agg.pd_mean = spec.k > 0 ? det_sum / n : kNaN;
    agg.mse_trials = mse_n;
    agg.freq_mse = mse_n ? f_mse / static_cast<double>(mse_n) : kNaN;
    agg.amp_mse = mse_n ? a_mse / static_cast<double>(mse_n) : kNaN;
    agg.freq_crb = f_crb / n;
    agg.amp_crb = a_crb / n;
    agg.pd_predicted = pd_pred / n;
    agg.snr_loss_db = loss / n;
    agg.mean_k_hat = khat / n;
    out.aggregates.push_back(agg);
  }
  return out;
}

void write_aggregate_csv(std::ostream& out, const ExperimentResult& r) {
  out << "bits,p_fa,sweep_snr_db,trials,p_fa_measured,p_oe_measured,pd_swept,pd_all,pd_mean,freq_mse,freq_crb,"
         "amp_mse,amp_crb,mse_trials,pd_predicted,snr_loss_db,mean_k_hat\n";
  for (const auto& a : r.aggregates) {
    out << bit_depth_label(a.cell.bits) << ',' << fmt(a.cell.p_fa) << ',' << (a.cell.has_sweep ? fmt(a.cell.sweep_snr_db) : "")
        << ',' << a.trials << ',' << fmt(a.p_fa_measured) << ',' << fmt(a.p_oe_measured) << ',' << fmt(a.pd_swept) << ','
        << fmt(a.pd_all) << ',' << fmt(a.pd_mean) << ',' << fmt(a.freq_mse) << ',' << fmt(a.freq_crb) << ','
        << fmt(a.amp_mse) << ',' << fmt(a.amp_crb) << ',' << a.mse_trials << ',' << fmt(a.pd_predicted) << ','
        << fmt(a.snr_loss_db) << ',' << fmt(a.mean_k_hat) << '\n';
  }
}

void write_trials_csv(std::ostream& out, const ExperimentResult& r) {
  out << "cell,trial,seed,bits,p_fa,sweep_snr_db,k_hat,false_alarms,overestimate,detected,freq_error,amp_error,"
         "crb_freq,crb_amp,pd_predicted,snr_loss_db\n";
  auto join = [](const auto& v, auto f) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ';';
      s += f(v[i]);
    }
    return s;
  };
  for (const auto& t : r.trials) {
    const CellSpec& c = r.aggregates.at(t.cell).cell;
    out << t.cell << ',' << t.trial << ',' << t.seed << ',' << bit_depth_label(c.bits) << ',' << fmt(c.p_fa) << ','
        << (c.has_sweep ? fmt(c.sweep_snr_db) : "") << ',' << t.k_hat << ',' << t.false_alarms << ','
        << (t.overestimate ? 1 : 0) << ',' << join(t.detected, [](bool b) { return std::string(b ? "1" : "0"); })
        << ',' << join(t.freq_error, fmt) << ',' << join(t.amp_error, fmt) << ',' << fmt(t.crb_freq) << ','
        << fmt(t.crb_amp) << ',' << fmt(t.pd_predicted) << ',' << fmt(t.snr_loss_db) << '\n';
  }
}

void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentSpec& spec, const ExperimentResult& r) {
  std::filesystem::create_directories(dir / "trace");
  {
    std::ofstream f(dir / "aggregate.csv");
    if (!f) throw std::runtime_error("cannot write " + (dir / "aggregate.csv").string());
    write_aggregate_csv(f, r);
  }
  {
    std::ofstream f(dir / "trials.csv");
    if (!f) throw std::runtime_error("cannot write " + (dir / "trials.csv").string());
    write_trials_csv(f, r);
  }
  for (const auto& a : r.aggregates) {
    std::ofstream f(dir / "trace" / ("cell_" + std::to_string(a.cell.index) + ".log"));
    f << "cell " << a.cell.index << " bits=" << bit_depth_label(a.cell.bits) << " p_fa=" << fmt(a.cell.p_fa);
    if (a.cell.has_sweep) f << " sweep_snr_db=" << fmt(a.cell.sweep_snr_db);
    f << " n=" << spec.n << " k=" << spec.k << " seed=" << spec.seed << "\n";
    const std::size_t base = a.cell.index * static_cast<std::size_t>(spec.trials);
    for (long t = 0; t < spec.trials; ++t) {
      const auto& rec = r.trials[base + static_cast<std::size_t>(t)];
      if (!rec.trace.empty()) f << rec.trace;
    }
  }
}

DemoRun run_demo(int bits, std::uint64_t seed) {
  constexpr long n = 128;
  DemoRun run;
  run.bits = bits;
  run.truth = {{2.2, Complex(-1.505, -0.497)}, {2.4, Complex(-0.164, -0.609)}};
  std::mt19937_64 rng(derive_seed(seed, 0, kNoiseStream));
  const SensingModel model;
  const CVector y = model.synthesize(run.truth, n) + complex_noise(rng, n, 1.0);
  const QuantizerSpec q = make_quantizer(
      bits, design_full_scale({std::abs(run.truth[0].amp), std::abs(run.truth[1].amp)}, 1.0));
  run.obs = quantize_complex(y, q);
  GnompConfig cfg;
  cfg.sigma = 1.0;
  cfg.keep_spectra = true;
  run.result = extract_spectrum(run.obs, cfg);

  auto losses = [&](const ComponentList& comps) {
    std::vector<double> out;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      ComponentList others;
      for (std::size_t k = 0; k < comps.size(); ++k) {
        if (k != i) others.push_back(comps[k]);
      }
      out.push_back(snr_loss(comps[i].omega, model.synthesize(others, n), 1.0, q));
    }
    return out;
  };
  run.theory_loss_db = losses(run.truth);
  run.estimated_loss_db = losses(run.result.components);
  return run;
}

void write_demo_outputs(const std::filesystem::path& dir, const std::vector<DemoRun>& runs) {
  std::filesystem::create_directories(dir);
  std::ofstream iters(dir / "demo_iterations.csv");
  std::ofstream spectra(dir / "demo_spectra.csv");
  std::ofstream est(dir / "demo_estimates.csv");
  std::ofstream trace(dir / "demo_trace.log");
  if (!iters || !spectra || !est || !trace) throw std::runtime_error("cannot write demo outputs under " + dir.string());
  iters << "bits,iteration,statistic_db,tau_db,omega_peak,detected\n";
  spectra << "bits,iteration,omega,statistic_db\n";
  est << "bits,component,omega,re_amp,im_amp,theory_loss_db,estimated_loss_db\n";
  for (const auto& run : runs) {
    const std::string b = bit_depth_label(run.bits);
    for (const auto& it : run.result.iterations) {
      iters << b << ',' << it.iteration << ',' << fmt(db20(it.max_statistic)) << ',' << fmt(db20(it.tau)) << ','
            << fmt(it.omega_peak) << ',' << (it.detected ? 1 : 0) << '\n';
      if (!it.spectrum) continue;
      for (Eigen::Index g = 0; g < it.spectrum->values.size(); ++g) {
        spectra << b << ',' << it.iteration << ',' << fmt(it.spectrum->omegas[g]) << ','
                << fmt(db20(it.spectrum->values[g])) << '\n';
      }
    }
    for (std::size_t i = 0; i < run.result.components.size(); ++i) {
      const auto& c = run.result.components[i];
      est << b << ',' << i << ',' << fmt(c.omega) << ',' << fmt(c.amp.real()) << ',' << fmt(c.amp.imag()) << ','
          << (i < run.theory_loss_db.size() ? fmt(run.theory_loss_db[i]) : "") << ','
          << fmt(run.estimated_loss_db[i]) << '\n';
    }
    trace << "B=" << b << "\n truth:\n" << describe_components(run.truth) << " run:\n" << describe_run(run.result)
          << " estimates:\n" << describe_components(run.result.components);
  }
}

CompressiveRun run_compressive_instance(long m, int bits, std::uint64_t seed) {
  constexpr long n = 128;
  if (m < 1) throw std::invalid_argument("run_compressive_instance: m must be >= 1");
  CompressiveRun run;
  run.m = m;
  std::mt19937_64 scene(derive_seed(seed, static_cast<std::uint64_t>(m), kSceneStream));
  std::mt19937_64 noise(derive_seed(seed, static_cast<std::uint64_t>(m), kNoiseStream));
  std::uniform_real_distribution<double> uni(0.0, kTwoPi);
  const SensingModel model(gaussian_matrix(scene, m, n));
  // 0 dB time-domain SNR each at σ² = 1.
  const double p1 = uni(scene), p2 = uni(scene);
  run.truth = {{1.5, std::polar(1.0, p1)}, {3.2, std::polar(1.0, p2)}};
  const CVector y = model.synthesize(run.truth, m) + complex_noise(noise, m, 1.0);
  const double gain = std::sqrt(2.0 * static_cast<double>(n));
  const QuantizerSpec q =
      bits == kInfiniteBits ? make_quantizer(kInfiniteBits, 1.0) : make_quantizer(bits, design_full_scale({gain, gain}, 1.0));
  GnompConfig cfg;
  cfg.sigma = 1.0;
  cfg.keep_spectra = true;
  run.result = extract_spectrum(quantize_complex(y, q), cfg, model);
  return run;
}

ExperimentResult run_signed(ExperimentSpec spec) {
  spec.measurement = Measurement::Signed;
  spec.bits = {1};
  return run_experiment(spec);
}

ExperimentResult run_compressive(ExperimentSpec spec) {
  spec.measurement = Measurement::Compressive;
  return run_experiment(spec);
}

}  // namespace qlsed
