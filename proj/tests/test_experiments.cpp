#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "qlsed/experiments.hpp"

using namespace qlsed;

namespace {

ExperimentSpec parse(const std::string& text) {
  std::istringstream in(text);
  return parse_experiment_spec(in);
}

ExperimentSpec small_spec() {
  return parse(R"(
scenario = gnomp
n = 64
k = 3
snr_db = 22
min_separation = 2.5
bits = 1, 3
p_fa = 0.01, 0.1
trials = 12
seed = 7
)");
}

std::string tables(const ExperimentResult& r) {
  std::ostringstream a, t;
  write_aggregate_csv(a, r);
  write_trials_csv(t, r);
  return a.str() + "\n--\n" + t.str();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double wrap_dist(double a, double b) {
  const double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

}  // namespace

TEST_CASE("config parsing") {
  const auto s = parse(R"(
# detection curve
scenario = rao_single
n = 1024
k = 1
frequencies = [1.0]
sweep_snr_db = 10:14:2     # inclusive range
bits = 1, 2, inf
p_fa = 0.01
trials = 50
seed = 99
threshold_omega = 1.5707963267948966
threshold_amp = 2
stop_rule = bic
sigma_mode = unknown
measurement = uniform
threads = 2
)");
  CHECK(s.scenario == "rao_single");
  CHECK(s.n == 1024);
  REQUIRE(s.sweep_snr_db.size() == 3);
  CHECK(s.sweep_snr_db[2] == Catch::Approx(14.0));
  REQUIRE(s.bits.size() == 3);
  CHECK(s.bits[2] == kInfiniteBits);
  CHECK(s.seed == 99);
  CHECK(s.threshold_amp == 2.0);
  CHECK(s.stop == StopRule::Bic);
  CHECK(s.sigma_mode == SigmaMode::Unknown);
  CHECK(s.threads == 2);

  const auto c = parse("measurement = compressive\ncompressive_m = 100\nfull_scale = 4.5\n");
  CHECK(c.measurement == Measurement::Compressive);
  CHECK(c.compressive_m == 100);
  CHECK(c.full_scale_rule == "full_scale");
  CHECK(c.full_scale == 4.5);

  CHECK_THROWS_AS(parse("colour = blue\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("n = twelve\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("n = 12.5\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("bits = 0\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("sweep_snr_db = 5:1:1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("no equals sign\n"), std::invalid_argument);
}

TEST_CASE("cells expand bits x p_fa x sweep") {
  auto s = small_spec();
  s.sweep_target = 1;
  s.snr_db = {25.0, 25.0, 25.0};
  s.sweep_snr_db = {10.0, 15.0};
  const auto cells = expand_cells(s);
  CHECK(cells.size() == 2 * 2 * 2);
  std::set<std::tuple<int, double, double>> seen;
  for (const auto& c : cells) seen.insert({c.bits, c.p_fa, c.sweep_snr_db});
  CHECK(seen.size() == cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) CHECK(cells[i].index == i);
}

TEST_CASE("stream seeds") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  std::set<std::uint64_t> seeds;
  for (std::uint64_t m : {1, 2}) {
    for (std::uint64_t a = 0; a < 50; ++a) {
      for (std::uint64_t b = 0; b < 3; ++b) seeds.insert(derive_seed(m, a, b));
    }
  }
  CHECK(seeds.size() == 2 * 50 * 3);
}

TEST_CASE("drawn frequencies keep the minimum separation") {
  auto s = small_spec();
  s.k = 8;
  s.n = 128;
  s.min_separation = 2.5;
  const auto cells = expand_cells(s);
  for (long t = 0; t < 300; ++t) {
    const auto truth = draw_truth(s, cells[0], t);
    REQUIRE(truth.size() == 8);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      for (std::size_t j = i + 1; j < truth.size(); ++j) {
        CHECK(wrap_dist(truth[i].omega, truth[j].omega) >= 2.5 * kTwoPi / 128 - 1e-12);
      }
    }
    // Common random numbers: the same trial index draws the same truth in every cell.
    const auto other = draw_truth(s, cells.back(), t);
    for (std::size_t i = 0; i < truth.size(); ++i) CHECK(other[i].omega == truth[i].omega);
  }
}

TEST_CASE("integrated SNR sets the amplitude") {
  auto s = small_spec();
  s.k = 2;
  s.snr_db = {20.0, 10.0};
  s.sigma2 = 2.0;
  const auto truth = draw_truth(s, expand_cells(s)[0], 0);
  CHECK(std::norm(truth[0].amp) * s.n / s.sigma2 == Catch::Approx(100.0).epsilon(1e-12));
  CHECK(std::norm(truth[1].amp) * s.n / s.sigma2 == Catch::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("zero trials produce header-only tables") {
  auto s = small_spec();
  s.trials = 0;
  const auto r = run_experiment(s);
  CHECK(r.trials.empty());
  std::ostringstream t;
  write_trials_csv(t, r);
  const std::string text = t.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  for (const auto& a : r.aggregates) CHECK(a.trials == 0);
}

TEST_CASE("reruns are byte-identical and independent of thread count") {
  auto s = small_spec();
  const std::string serial = tables(run_experiment(s));
  CHECK(tables(run_experiment(s)) == serial);
  s.threads = 3;
  CHECK(tables(run_experiment(s)) == serial);
  s.seed = 8;
  CHECK(tables(run_experiment(s)) != serial);
}

TEST_CASE("output files") {
  const auto dir = std::filesystem::temp_directory_path() / "qlsed_test_outputs";
  std::filesystem::remove_all(dir);
  auto s = small_spec();
  s.trace_trials = 1;
  const auto r = run_experiment(s);
  write_experiment_outputs(dir, s, r);
  const std::string agg = slurp(dir / "aggregate.csv");
  CHECK(agg.rfind("bits,p_fa,sweep_snr_db,trials,p_fa_measured,p_oe_measured,pd_swept,pd_all,pd_mean,freq_mse,freq_crb,"
                  "amp_mse,amp_crb,mse_trials,pd_predicted,snr_loss_db,mean_k_hat\n",
                  0) == 0);
  CHECK(std::count(agg.begin(), agg.end(), '\n') == 1 + static_cast<long>(r.aggregates.size()));
  const std::string trials = slurp(dir / "trials.csv");
  CHECK(trials.find("runtime") == std::string::npos);
  CHECK(agg.find("runtime") == std::string::npos);
  CHECK(std::filesystem::exists(dir / "trace" / "cell_0.log"));
  write_experiment_outputs(dir / "again", s, run_experiment(s));
  CHECK(slurp(dir / "again" / "aggregate.csv") == agg);
  CHECK(slurp(dir / "again" / "trials.csv") == trials);
  std::filesystem::remove_all(dir);
}

TEST_CASE("noise-only trials: every detection is a false alarm") {
  auto s = parse("n = 64\nk = 0\nbits = 2\np_fa = 0.05\ntrials = 800\nseed = 3\n");
  const auto r = run_experiment(s);
  REQUIRE(r.aggregates.size() == 1);
  const auto& a = r.aggregates[0];
  long with_detection = 0;
  for (const auto& t : r.trials) {
    CHECK(t.false_alarms == t.k_hat);
    CHECK(t.overestimate == (t.k_hat > 0));
    with_detection += t.k_hat > 0;
  }
  CHECK(a.p_fa_measured == Catch::Approx(static_cast<double>(with_detection) / s.trials));
  CHECK(std::abs(a.p_fa_measured - 0.05) <= 2.576 * std::sqrt(0.05 * 0.95 / s.trials));
}

TEST_CASE("strong targets are detected and scored") {
  auto s = small_spec();
  s.snr_db = {35.0};
  s.bits = {3};
  s.p_fa = {0.01};
  const auto r = run_experiment(s);
  const auto& a = r.aggregates[0];
  CHECK(a.pd_all >= 0.9);
  CHECK(a.mse_trials > 0);
  CHECK(std::isfinite(a.freq_mse));
  CHECK(a.freq_crb > 0.0);
  for (const auto& t : r.trials) {
    REQUIRE(t.detected.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      if (t.detected[i]) CHECK(std::abs(t.freq_error[i]) <= std::numbers::pi / s.n);
      else CHECK(std::isnan(t.freq_error[i]));
    }
  }
}

TEST_CASE("identity sensing matrix reproduces the uniform pipeline") {
  std::mt19937_64 rng(51);
  const int n = 64;
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  CVector y = 1.1 * atom(0.8, n) + Complex(0.0, 0.9) * atom(2.2, n);
  for (int i = 0; i < n; ++i) {
    const double re = nd(rng);
    y[i] += Complex(re, nd(rng));
  }
  const auto obs = quantize_complex(y, make_quantizer(2, 2.5));
  GnompConfig cfg;
  cfg.sigma = 1.0;
  const auto plain = extract_spectrum(obs, cfg);
  const auto ident = extract_spectrum(obs, cfg, SensingModel(CMatrix::Identity(n, n)));
  REQUIRE(plain.components.size() == ident.components.size());
  for (std::size_t i = 0; i < plain.components.size(); ++i) {
    CHECK(plain.components[i].omega == Catch::Approx(ident.components[i].omega).epsilon(1e-9));
    CHECK(std::abs(plain.components[i].amp - ident.components[i].amp) <= 1e-8);
  }
}

TEST_CASE("signed and compressive harness entry points") {
  auto s = parse("n = 128\nk = 2\nsnr_db = 25\ntrials = 4\nseed = 5\n");
  const auto signed_run = run_signed(s);
  REQUIRE(signed_run.aggregates.size() == 1);
  CHECK(signed_run.aggregates[0].cell.bits == 1);
  CHECK(signed_run.trials.size() == 4);
  s.compressive_m = 96;
  const auto comp = run_compressive(s);
  CHECK(comp.trials.size() == 4);
  s.bits = {2};
  CHECK_THROWS_AS(run_experiment([&] {
                    auto t = s;
                    t.measurement = Measurement::Signed;
                    return t;
                  }()),
                  std::invalid_argument);
}

TEST_CASE("compressive fixed instances") {
  for (long m : {200L, 100L}) {
    const auto run = run_compressive_instance(m, 1, 1);
    INFO("m " << m);
    REQUIRE(run.result.components.size() == 2);
    std::vector<double> w{run.result.components[0].omega, run.result.components[1].omega};
    std::sort(w.begin(), w.end());
    CHECK(std::abs(w[0] - 1.5) < 0.01);
    CHECK(std::abs(w[1] - 3.2) < 0.01);
  }
}

TEST_CASE("two-target instance outputs") {
  const auto dir = std::filesystem::temp_directory_path() / "qlsed_test_demo";
  std::filesystem::remove_all(dir);
  const std::vector<DemoRun> runs{run_demo(1, 1), run_demo(2, 1)};
  write_demo_outputs(dir, runs);
  for (const char* f : {"demo_iterations.csv", "demo_spectra.csv", "demo_estimates.csv", "demo_trace.log"}) {
    CHECK(std::filesystem::file_size(dir / f) > 0);
  }
  CHECK(runs[0].theory_loss_db.size() == 2);
  CHECK(std::abs(runs[0].theory_loss_db[0] - 2.58) <= 0.01);
  CHECK(std::abs(runs[0].theory_loss_db[1] - 5.21) <= 0.01);
  std::filesystem::remove_all(dir);
}
