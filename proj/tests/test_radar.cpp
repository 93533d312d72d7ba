#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "qlsed/radar.hpp"

using namespace qlsed;

namespace {

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

void write_int16(const std::filesystem::path& p, const std::vector<std::int16_t>& v) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(std::int16_t)));
}

CVector complex_noise(std::mt19937_64& rng, Eigen::Index n, double sigma2) {
  std::normal_distribution<double> nd(0.0, std::sqrt(sigma2 / 2.0));
  CVector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = nd(rng);
    w[i] = Complex(re, nd(rng));
  }
  return w;
}

double range_bin(const RadarParams& p) {
  return kSpeedOfLight * p.sample_rate_hz / (2.0 * p.slope_hz_per_s * static_cast<double>(p.samples));
}

}  // namespace

TEST_CASE("format descriptors") {
  const auto f = parse_iq_format("float32, qi, frame=128, channels=4, layout=sample, frames=10");
  CHECK(f.type == SampleType::Float32);
  CHECK(f.q_first);
  CHECK(f.frame_length == 128);
  CHECK(f.channels == 4);
  CHECK(f.layout == ChannelLayout::SampleMajor);
  REQUIRE(f.expected_frames);
  CHECK(*f.expected_frames == 10);
  CHECK(f.sample_bytes() == 4);
  const auto d = parse_iq_format("int16");
  CHECK(d.type == SampleType::Int16);
  CHECK(!d.q_first);
  CHECK_THROWS_AS(parse_iq_format("int12"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iq_format("frame=0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iq_format("frame=abc"), std::invalid_argument);
}

TEST_CASE("int16 capture splits into frames") {
  const auto path = temp_file("qlsed_iq_frames.bin");
  std::vector<std::int16_t> raw(2 * 1024);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<std::int16_t>(static_cast<int>(i % 200) - 100);
  write_int16(path, raw);
  const auto cap = load_iq(path, parse_iq_format("int16, iq, frame=256"));
  REQUIRE(cap.frames.size() == 4);
  CHECK(cap.warnings.empty());
  for (long f = 0; f < 4; ++f) CHECK(cap.frames[static_cast<std::size_t>(f)].frame == f);
  CHECK(cap.frames[1].samples[3] == Complex(raw[2 * 259], raw[2 * 259 + 1]));
  const auto swapped = load_iq(path, parse_iq_format("int16, qi, frame=256"));
  CHECK(swapped.frames[1].samples[3] == Complex(raw[2 * 259 + 1], raw[2 * 259]));
  CHECK_THROWS_AS(load_iq(path, parse_iq_format("int16, frame=256, frames=5")), std::invalid_argument);
  std::filesystem::remove(path);
}

TEST_CASE("declared width that does not divide the file is rejected") {
  const auto path = temp_file("qlsed_iq_width.bin");
  // 4100 bytes: whole int16 pairs, not whole float32 pairs.
  write_int16(path, std::vector<std::int16_t>(2 * 1025, 1));
  CHECK_NOTHROW(load_iq(path, parse_iq_format("int16, frame=256")));
  CHECK_THROWS_AS(load_iq(path, parse_iq_format("float32, frame=256")), std::invalid_argument);
  write_int16(path, std::vector<std::int16_t>(2 * 1024 + 1, 1));
  CHECK_THROWS_AS(load_iq(path, parse_iq_format("int16, frame=256")), std::invalid_argument);
  CHECK_THROWS_AS(load_iq(temp_file("qlsed_does_not_exist.bin"), parse_iq_format("int16")), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("partial trailing frame is dropped with a warning") {
  const auto path = temp_file("qlsed_iq_partial.bin");
  write_int16(path, std::vector<std::int16_t>(2 * (512 + 17), 3));
  const auto cap = load_iq(path, parse_iq_format("int16, frame=256"));
  CHECK(cap.frames.size() == 2);
  CHECK(cap.warnings.size() == 1);
  std::filesystem::remove(path);
}

TEST_CASE("written captures read back bit-exactly") {
  std::mt19937_64 rng(61);
  std::uniform_int_distribution<int> pick(-32768, 32767);
  std::normal_distribution<double> nd(0.0, 100.0);
  for (const std::string desc : {"int16, iq, frame=64, channels=3, layout=frame", "int16, qi, frame=64, channels=3, layout=sample",
                                 "float32, iq, frame=64, channels=2, layout=sample"}) {
    const auto fmt = parse_iq_format(desc);
    std::vector<IqFrame> frames;
    for (long f = 0; f < 5; ++f) {
      for (long c = 0; c < fmt.channels; ++c) {
        IqFrame fr;
        fr.frame = f;
        fr.channel = c;
        fr.samples.resize(fmt.frame_length);
        for (long i = 0; i < fmt.frame_length; ++i) {
          if (fmt.type == SampleType::Int16) {
            fr.samples[i] = Complex(pick(rng), pick(rng));
          } else {
            // Round through float storage explicitly; -O3 builds have been
            // seen folding the narrowing casts inside one expression.
            volatile float re = static_cast<float>(nd(rng));
            volatile float im = static_cast<float>(nd(rng));
            fr.samples[i] = Complex(re, im);
          }
        }
        frames.push_back(fr);
      }
    }
    const auto path = temp_file("qlsed_iq_roundtrip.bin");
    write_iq(path, frames, fmt);
    const auto cap = load_iq(path, fmt);
    INFO(desc);
    REQUIRE(cap.frames.size() == frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      CHECK(cap.frames[i].frame == frames[i].frame);
      CHECK(cap.frames[i].channel == frames[i].channel);
      CHECK(cap.frames[i].samples == frames[i].samples);
    }
    std::filesystem::remove(path);
  }
  IqFrame big;
  big.samples = CVector::Constant(8, Complex(40000.0, 0.0));
  CHECK_THROWS_AS(write_iq(temp_file("qlsed_iq_big.bin"), {big}, parse_iq_format("int16, frame=8")), std::invalid_argument);
}

TEST_CASE("noise variance estimate") {
  std::mt19937_64 rng(62);
  const int trials = 1000, n = 256;
  const double sigma2 = 250.0;
  double sum = 0.0;
  int inside = 0;
  for (int t = 0; t < trials; ++t) {
    const double v = estimate_noise_variance(complex_noise(rng, n, sigma2));
    sum += v;
    inside += v >= 212.0 && v <= 288.0;
  }
  CHECK(std::abs(sum / trials - sigma2) <= 0.15 * sigma2);
  // Sample median of 256 unit exponentials: relative spread about 0.09, so
  // ±15% holds for roughly 9 frames in 10.
  CHECK(inside >= 0.85 * trials);

  const CVector frame = complex_noise(rng, n, 3.0);
  const double base = estimate_noise_variance(frame);
  for (double c : {0.1, 7.0}) CHECK(estimate_noise_variance(c * frame) == Catch::Approx(c * c * base).epsilon(1e-12));
  CHECK_THROWS_AS(estimate_noise_variance(CVector::Zero(n)), std::invalid_argument);
  CHECK_THROWS_AS(estimate_noise_variance(complex_noise(rng, 16, 1.0)), std::invalid_argument);
}

TEST_CASE("beat frequency to range map") {
  RadarParams p;
  CHECK(omega_to_range(0.0, p) == 0.0);
  for (double r : {0.5, 3.05, 4.88, 20.0}) CHECK(omega_to_range(range_to_omega(r, p), p) == Catch::Approx(r).epsilon(1e-12));
  const double w = 0.7;
  RadarParams doubled = p;
  doubled.slope_hz_per_s *= 2.0;
  CHECK(omega_to_range(w, doubled) == Catch::Approx(omega_to_range(w, p) / 2.0).epsilon(1e-14));
  CHECK(beat_frequency_to_range(1e6, p) == Catch::Approx(kSpeedOfLight * 1e6 / (2.0 * p.slope_hz_per_s)).epsilon(1e-15));
  CHECK(omega_to_range(kTwoPi / p.samples, p) == Catch::Approx(range_bin(p)).epsilon(1e-12));
}

TEST_CASE("radar parameter checks") {
  RadarParams p;
  CHECK_NOTHROW(p.validate());
  p.slope_hz_per_s = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  std::istringstream in("sample_rate_hz = 5e6\nsamples = 128\n");
  const auto q = parse_radar_params(in);
  CHECK(q.sample_rate_hz == 5e6);
  CHECK(q.samples == 128);
  CHECK(q.carrier_hz == 77e9);
  std::istringstream bad("wavelength = 4\n");
  CHECK_THROWS_AS(parse_radar_params(bad), std::invalid_argument);
}

TEST_CASE("synthetic two-target frame") {
  RadarParams p;
  std::mt19937_64 rng(63);
  const double sigma2 = 250.0;
  const std::vector<SyntheticTarget> targets{{4.88, Complex(30.0, 10.0)}, {3.05, Complex(-12.0, 18.0)}};
  std::vector<IqFrame> frames;
  for (long f = 0; f < 4; ++f) frames.push_back({synthesize_frame(p, targets, sigma2, rng), f, 0});

  RangeProfileOptions opts;  // one bit, full scale 60
  const auto profiles = range_profile(frames, p, opts);
  REQUIRE(profiles.size() == frames.size());
  for (const auto& prof : profiles) {
    CHECK(prof.sigma2 > 0.0);
    for (const auto& t : targets) {
      const bool found = std::any_of(prof.detections.begin(), prof.detections.end(), [&](const RangeDetection& d) {
        return std::abs(d.range_m - t.range_m) <= range_bin(p);
      });
      INFO("frame " << prof.frame << " target " << t.range_m);
      CHECK(found);
    }
    for (const auto& d : prof.detections) CHECK(d.range_m == Catch::Approx(omega_to_range(d.omega, p)).epsilon(1e-12));
  }

  // Unquantized path runs the estimator on the raw samples.
  RangeProfileOptions raw;
  raw.quantizer = make_quantizer(kInfiniteBits, 1.0);
  raw.sigma2 = sigma2;
  raw.gnomp.sigma = std::sqrt(sigma2);
  const auto prof = range_profile({frames[0]}, p, raw);
  GnompConfig cfg = raw.gnomp;
  cfg.sigma = std::sqrt(sigma2);
  const auto direct = extract_spectrum(quantize_complex(frames[0].samples, raw.quantizer), cfg);
  REQUIRE(prof[0].detections.size() == direct.components.size());
  for (std::size_t i = 0; i < direct.components.size(); ++i) {
    CHECK(prof[0].detections[i].omega == direct.components[i].omega);
    CHECK(prof[0].detections[i].amp == direct.components[i].amp);
  }
}
