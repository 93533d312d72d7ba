#pragma once

// Seeded Monte Carlo harness: scenario description, per-trial simulation,
// deterministic aggregation and CSV output.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "qlsed/gnomp.hpp"

namespace qlsed {

enum class Measurement { Uniform, Signed, Compressive };

struct ExperimentSpec {
  // "gnomp": full estimator per trial. "rao_single": one sinusoid on top of a
  // known threshold signal, detected by the Nyquist-grid Rao test alone.
  std::string scenario = "gnomp";
  long n = 512;
  int k = 1;
  std::vector<double> frequencies;  // empty: random with min_separation
  double min_separation = 2.5;      // in DFT bins
  std::vector<double> snr_db;       // integrated SNR per target; one value is broadcast
  int sweep_target = 0;             // 1-based target whose SNR is swept; 0 sweeps every target
  std::vector<double> sweep_snr_db;
  std::vector<int> bits{1};
  std::vector<double> p_fa{0.01};
  long trials = 100;
  std::uint64_t seed = 1;
  std::string full_scale_rule = "paper_max_rule";  // or "full_scale"
  double full_scale = 1.0;
  Measurement measurement = Measurement::Uniform;
  long compressive_m = 0;
  double sigma2 = 1.0;
  SigmaMode sigma_mode = SigmaMode::Known;
  int oversample = 4;
  StopRule stop = StopRule::Cfar;
  // rao_single: threshold signal threshold_amp · a(threshold_omega)
  double threshold_omega = 0.0;
  double threshold_amp = 0.0;
  int threads = 1;
  int trace_trials = 3;  // trials per cell whose full trace is logged
};

/// Parses "key = value" lines; '#' starts a comment; lists are comma separated,
/// optionally wrapped in brackets. Unknown keys are an error.
ExperimentSpec parse_experiment_spec(std::istream& in);
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct TrialRecord {
  std::size_t cell = 0;
  long trial = 0;
  std::uint64_t seed = 0;
  int k_hat = 0;
  int false_alarms = 0;
  bool overestimate = false;
  std::vector<bool> detected;        // per target
  std::vector<double> freq_error;    // per target, NaN when missed
  std::vector<double> amp_error;     // per target |x̂ - x|², NaN when missed
  double crb_freq = 0.0;             // mean per-target frequency CRB
  double crb_amp = 0.0;              // mean per-target amplitude CRB trace
  double pd_predicted = 0.0;         // swept (or weakest) target
  double snr_loss_db = 0.0;
  double runtime_ms = 0.0;           // kept out of every output file
  bool traced = false;
  std::string trace;
};

struct CellSpec {
  std::size_t index = 0;
  int bits = 1;
  double p_fa = 0.01;
  double sweep_snr_db = 0.0;
  bool has_sweep = false;
};

struct CellAggregate {
  CellSpec cell;
  long trials = 0;
  double p_fa_measured = 0.0;
  double p_oe_measured = 0.0;
  double pd_swept = 0.0;
  double pd_all = 0.0;
  double pd_mean = 0.0;
  double freq_mse = 0.0;
  double freq_crb = 0.0;
  double amp_mse = 0.0;
  double amp_crb = 0.0;
  long mse_trials = 0;
  double pd_predicted = 0.0;
  double snr_loss_db = 0.0;
  double mean_k_hat = 0.0;
};

struct ExperimentResult {
  std::vector<CellAggregate> aggregates;
  std::vector<TrialRecord> trials;
};

std::vector<CellSpec> expand_cells(const ExperimentSpec& spec);

/// Truth parameters of one trial; identical across cells with the same trial
/// index apart from the swept SNR.
ComponentList draw_truth(const ExperimentSpec& spec, const CellSpec& cell, long trial);

/// Runs one trial of one cell. Deterministic in (spec, cell, trial).
TrialRecord run_trial(const ExperimentSpec& spec, const CellSpec& cell, long trial);

ExperimentResult run_experiment(const ExperimentSpec& spec);

void write_aggregate_csv(std::ostream& out, const ExperimentResult& r);
void write_trials_csv(std::ostream& out, const ExperimentResult& r);
/// Writes aggregate.csv, trials.csv and trace/cell_<i>.log under dir.
void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentSpec& spec,
                              const ExperimentResult& r);

/// Counter-based stream seed for (master, a, b).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b);

/// Fixed two-sinusoid instance (N = 128, σ² = 1) with every iteration's spectrum.
struct DemoRun {
  int bits = 1;
  ComponentList truth;
  QuantizedObservation obs;
  GnompResult result;
  std::vector<double> theory_loss_db;     // other target treated as known
  std::vector<double> estimated_loss_db;  // from the estimates
};

DemoRun run_demo(int bits, std::uint64_t seed);
void write_demo_outputs(const std::filesystem::path& dir, const std::vector<DemoRun>& runs);

/// Compressive instance: N = 128, K = 2, ω = (1.5, 3.2), 0 dB each, σ² = 1.
struct CompressiveRun {
  long m = 0;
  ComponentList truth;
  GnompResult result;
};

CompressiveRun run_compressive_instance(long m, int bits, std::uint64_t seed);

/// Signed-measurement Monte Carlo; forces measurement = Signed.
ExperimentResult run_signed(ExperimentSpec spec);

/// Compressive Monte Carlo; forces measurement = Compressive.
ExperimentResult run_compressive(ExperimentSpec spec);

}  // namespace qlsed
