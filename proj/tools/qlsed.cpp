// qlsed: command-line front end for the estimation, detection and Monte Carlo
// machinery.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "qlsed/experiments.hpp"
#include "qlsed/radar.hpp"

using namespace qlsed;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// One complex sample per line as "re,im"; a non-numeric first line is a header.
CVector read_complex_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Complex> vals;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected re,im");
    }
    try {
      vals.emplace_back(std::stod(a), std::stod(b));
    } catch (const std::exception&) {
      if (vals.empty() && line_no == 1) continue;
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  CVector v(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
  return v;
}

// Record options shared by rao and gnomp. Quantized records may be given as
// their output levels: re-quantizing a level with the same full scale is a no-op.
struct RecordOptions {
  std::string input;
  std::string bits = "inf";
  double full_scale = 0.0;
  std::string thresholds;  // signed one-bit record against these thresholds

  void add(CLI::App* app) {
    app->add_option("observation", input, "CSV of re,im samples")->required()->check(CLI::ExistingFile);
    app->add_option("--bits", bits, "bit depth (1..30 or inf)");
    app->add_option("--full-scale", full_scale, "quantizer full scale (required for finite bit depths)");
    app->add_option("--thresholds", thresholds, "CSV of complex one-bit thresholds (signed record)");
  }

  QuantizedObservation load() const {
    const CVector y = read_complex_csv(input);
    if (!thresholds.empty()) {
      const CVector h = read_complex_csv(thresholds);
      if (h.size() != y.size()) throw std::runtime_error("threshold file length differs from the observation");
      return quantize_signed(y, h);
    }
    const int b = parse_bit_depth(bits);
    if (b != kInfiniteBits && !(full_scale > 0.0)) throw std::runtime_error("--full-scale is required with --bits");
    return quantize_complex(y, make_quantizer(b, b == kInfiniteBits ? 1.0 : full_scale));
  }
};

std::ostream& open_out(const std::string& path, std::unique_ptr<std::ofstream>& holder) {
  if (path.empty() || path == "-") return std::cout;
  holder = std::make_unique<std::ofstream>(path);
  if (!*holder) throw std::runtime_error("cannot write " + path);
  return *holder;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-bit line spectral estimation and detection"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Monte Carlo experiment from a key = value config");
  std::string run_config, run_out;
  int run_threads = 0;
  std::uint64_t run_seed = 0;
  run->add_option("config", run_config, "experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "output directory")->required();
  auto* threads_opt = run->add_option("--threads", run_threads, "worker threads");
  auto* seed_opt = run->add_option("--seed", run_seed, "master seed");

  // demo
  auto* demo = app.add_subcommand("demo", "Two-sinusoid N = 128 instance at B = 1 and B = 2");
  std::string demo_out = "demo_out";
  std::uint64_t demo_seed = 1;
  demo->add_option("--out", demo_out, "output directory");
  demo->add_option("--seed", demo_seed, "noise seed");

  // crb
  auto* crb = app.add_subcommand("crb", "CRB and SNR loss of one sinusoid versus N, SNR or bit depth");
  std::string crb_sweep = "snr", crb_values, crb_out;
  long crb_n = 128;
  double crb_snr = 20.0, crb_omega = 1.0, crb_phase = 0.0, crb_sigma2 = 1.0, crb_zeta_amp = 0.0, crb_zeta_omega = 0.0;
  std::string crb_bits = "1";
  crb->add_option("--sweep", crb_sweep, "n | snr | bits")->check(CLI::IsMember({"n", "snr", "bits"}));
  crb->add_option("--values", crb_values, "comma separated sweep values (bits accept inf)")->required();
  crb->add_option("--n", crb_n, "record length");
  crb->add_option("--snr-db", crb_snr, "integrated SNR in dB");
  crb->add_option("--bits", crb_bits, "bit depth");
  crb->add_option("--omega", crb_omega, "frequency in rad/sample");
  crb->add_option("--phase", crb_phase, "amplitude phase in rad");
  crb->add_option("--sigma2", crb_sigma2, "noise variance");
  crb->add_option("--zeta-amp", crb_zeta_amp, "known threshold sinusoid amplitude");
  crb->add_option("--zeta-omega", crb_zeta_omega, "known threshold sinusoid frequency");
  crb->add_option("--out", crb_out, "CSV path (default stdout)");

  // rao
  auto* rao = app.add_subcommand("rao", "Rao statistic spectrum of an observation");
  RecordOptions rao_rec;
  rao_rec.add(rao);
  std::string rao_zeta, rao_out;
  double rao_sigma2 = 1.0;
  int rao_os = 4;
  rao->add_option("--zeta", rao_zeta, "CSV of the known threshold signal (default zero)");
  rao->add_option("--sigma2", rao_sigma2, "noise variance");
  rao->add_option("--oversample", rao_os, "grid oversampling factor");
  rao->add_option("--out", rao_out, "CSV path (default stdout)");

  // gnomp
  auto* gn = app.add_subcommand("gnomp", "Extract sinusoids from an observation");
  RecordOptions gn_rec;
  gn_rec.add(gn);
  std::string gn_out, gn_trace, gn_stop = "cfar", gn_sigma_mode = "known";
  double gn_sigma2 = 1.0, gn_pfa = 0.01;
  int gn_os = 4;
  gn->add_option("--sigma2", gn_sigma2, "noise variance (initial value when unknown)");
  gn->add_option("--sigma-mode", gn_sigma_mode, "known | unknown")->check(CLI::IsMember({"known", "unknown"}));
  gn->add_option("--pfa", gn_pfa, "false-alarm rate");
  gn->add_option("--oversample", gn_os, "identification grid oversampling");
  gn->add_option("--stop", gn_stop, "cfar | bic")->check(CLI::IsMember({"cfar", "bic"}));
  gn->add_option("--out", gn_out, "CSV path (default stdout)");
  gn->add_option("--trace", gn_trace, "trace log path");

  // radar
  auto* radar = app.add_subcommand("radar", "Range profile of a dechirped FMCW capture");
  std::string rd_in, rd_format = "int16,iq,frame=256", rd_params, rd_bits = "1", rd_out;
  double rd_pfa = 0.01, rd_full_scale = 0.0, rd_sigma2 = 0.0;
  bool rd_unknown = false;
  radar->add_option("--in", rd_in, "raw IQ capture")->required()->check(CLI::ExistingFile);
  radar->add_option("--format", rd_format, "format descriptor, e.g. int16,iq,frame=256,channels=4");
  radar->add_option("--params", rd_params, "radar parameter file (default: built-in capture table)");
  radar->add_option("--bits", rd_bits, "bit depth");
  radar->add_option("--pfa", rd_pfa, "false-alarm rate");
  radar->add_option("--full-scale", rd_full_scale, "quantizer full scale in capture units (60 in the field runs)")
      ->required();
  radar->add_option("--sigma2", rd_sigma2, "noise variance (default: per-frame periodogram estimate)");
  radar->add_flag("--sigma-unknown", rd_unknown, "re-fit the noise level inside the extractor");
  radar->add_option("--out", rd_out, "CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentSpec spec = load_experiment_spec(run_config);
      if (*threads_opt) spec.threads = std::max(1, run_threads);
      if (*seed_opt) spec.seed = run_seed;
      const ExperimentResult r = run_experiment(spec);
      write_experiment_outputs(run_out, spec, r);
      std::cerr << "wrote " << r.aggregates.size() << " cells x " << spec.trials << " trials to " << run_out << "\n";
    } else if (*demo) {
      std::vector<DemoRun> runs{run_demo(1, demo_seed), run_demo(2, demo_seed)};
      write_demo_outputs(demo_out, runs);
      for (const auto& d : runs) {
        std::cout << "B=" << d.bits << ":";
        for (const auto& it : d.result.iterations) std::cout << " " << fmt(db20(it.max_statistic)) << "dB";
        std::cout << " | tau " << fmt(db20(d.result.iterations.front().tau)) << "dB |";
        for (std::size_t i = 0; i < d.result.components.size(); ++i) {
          std::cout << " omega=" << fmt(d.result.components[i].omega) << " loss=" << fmt(d.estimated_loss_db[i]) << "dB";
        }
        std::cout << "\n";
      }
    } else if (*crb) {
      std::unique_ptr<std::ofstream> holder;
      std::ostream& out = open_out(crb_out, holder);
      out << "sweep,value,n,snr_db,bits,crb_omega,crb_amp_trace,snr_loss_db\n";
      std::vector<std::string> values;
      {
        std::stringstream ss(crb_values);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (!item.empty()) values.push_back(item);
        }
      }
      for (const auto& v : values) {
        long n = crb_n;
        double snr = crb_snr;
        int bits = parse_bit_depth(crb_bits);
        if (crb_sweep == "n") n = std::stol(v);
        else if (crb_sweep == "snr") snr = std::stod(v);
        else bits = parse_bit_depth(v);
        const double sigma = std::sqrt(crb_sigma2);
        const double mag = std::sqrt(crb_sigma2 * from_db10(snr) / static_cast<double>(n));
        const ComponentList target{{crb_omega, std::polar(mag, crb_phase)}};
        const CVector zeta = crb_zeta_amp * atom(crb_zeta_omega, n);
        const QuantizerSpec q =
            make_quantizer(bits, bits == kInfiniteBits ? 1.0 : design_full_scale({mag, std::abs(crb_zeta_amp)}, sigma));
        const FimResult fim = fim_general(target, zeta, sigma, q);
        const double c_omega = fim.singular ? INFINITY : fim.inverse(0, 0);
        const double c_amp = fim.singular ? INFINITY : fim.inverse(1, 1) + fim.inverse(2, 2);
        out << crb_sweep << ',' << v << ',' << n << ',' << fmt(snr) << ',' << bit_depth_label(bits) << ','
            << fmt(c_omega) << ',' << fmt(c_amp) << ',' << fmt(snr_loss(crb_omega, zeta, sigma, q)) << '\n';
      }
    } else if (*rao) {
      const QuantizedObservation obs = rao_rec.load();
      const CVector zeta = rao_zeta.empty() ? CVector(CVector::Zero(obs.size())) : read_complex_csv(rao_zeta);
      if (zeta.size() != obs.size()) throw std::runtime_error("threshold signal length differs from the observation");
      const double sigma = std::sqrt(rao_sigma2);
      const RaoGridResult g =
          rao_grid(pseudo_measurements(obs, zeta, sigma), zeta, sigma, obs.quantizer, rao_os);
      std::unique_ptr<std::ofstream> holder;
      std::ostream& out = open_out(rao_out, holder);
      out << "frequency,statistic_dB\n";
      for (Eigen::Index i = 0; i < g.values.size(); ++i) out << fmt(g.omegas[i]) << ',' << fmt(db20(g.values[i])) << '\n';
    } else if (*gn) {
      const QuantizedObservation obs = gn_rec.load();
      GnompConfig cfg;
      cfg.p_fa = gn_pfa;
      cfg.oversample = gn_os;
      cfg.sigma = std::sqrt(gn_sigma2);
      cfg.sigma_mode = gn_sigma_mode == "unknown" ? SigmaMode::Unknown : SigmaMode::Known;
      cfg.stop = gn_stop == "bic" ? StopRule::Bic : StopRule::Cfar;
      const GnompResult r = extract_spectrum(obs, cfg);
      std::unique_ptr<std::ofstream> holder;
      std::ostream& out = open_out(gn_out, holder);
      out << "omega,re_amp,im_amp,statistic_dB\n";
      for (std::size_t i = 0; i < r.components.size(); ++i) {
        const auto& c = r.components[i];
        const double stat = i < r.detection_statistic.size() ? r.detection_statistic[i] : 0.0;
        out << fmt(c.omega) << ',' << fmt(c.amp.real()) << ',' << fmt(c.amp.imag()) << ',' << fmt(db20(stat)) << '\n';
      }
      if (!gn_trace.empty()) {
        std::ofstream tr(gn_trace);
        if (!tr) throw std::runtime_error("cannot write " + gn_trace);
        for (const auto& it : r.iterations) {
          tr << "iter " << it.iteration << " max_stat_db=" << fmt(db20(it.max_statistic)) << " tau_db="
             << fmt(db20(it.tau)) << " peak=" << fmt(it.omega_peak) << " sigma=" << fmt(it.sigma)
             << (it.detected ? " detected" : " stop") << "\n";
        }
        for (const auto& e : r.events) {
          tr << "event iter=" << e.iteration << " " << e.kind << " comp=" << e.component
             << (e.accepted ? " accepted" : " rejected") << " ll " << fmt(e.ll_before) << " -> " << fmt(e.ll_after)
             << "\n";
        }
        tr << "stop: " << r.stop_reason << "\n";
      }
    } else if (*radar) {
      const RadarParams params = rd_params.empty() ? RadarParams{} : load_radar_params(rd_params);
      params.validate();
      const IqCapture cap = load_iq(rd_in, parse_iq_format(rd_format));
      for (const auto& w : cap.warnings) std::cerr << "warning: " << w << "\n";
      RangeProfileOptions opt;
      const int bits = parse_bit_depth(rd_bits);
      if (!(rd_full_scale > 0.0)) throw std::runtime_error("--full-scale must be positive");
      opt.quantizer = make_quantizer(bits, bits == kInfiniteBits ? 1.0 : rd_full_scale);
      opt.gnomp.p_fa = rd_pfa;
      opt.gnomp.sigma_mode = rd_unknown ? SigmaMode::Unknown : SigmaMode::Known;
      if (rd_sigma2 > 0.0) opt.sigma2 = rd_sigma2;
      const auto profiles = range_profile(cap.frames, params, opt);
      std::unique_ptr<std::ofstream> holder;
      std::ostream& out = open_out(rd_out, holder);
      out << "frame,channel,range_m,amp_re,amp_im,statistic_dB\n";
      for (const auto& p : profiles) {
        for (const auto& d : p.detections) {
          out << p.frame << ',' << p.channel << ',' << fmt(d.range_m) << ',' << fmt(d.amp.real()) << ','
              << fmt(d.amp.imag()) << ',' << fmt(db20(d.statistic)) << '\n';
        }
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
