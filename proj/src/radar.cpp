#include "qlsed/radar.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qlsed {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_number(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument("bad value for " + key + ": '" + v + "'");
  return d;
}

long parse_count(const std::string& key, const std::string& v) {
  const double d = parse_number(key, v);
  if (d != std::floor(d) || d < 1) throw std::invalid_argument(key + " must be a positive integer");
  return static_cast<long>(d);
}

}  // namespace

void RadarParams::validate() const {
  if (!(carrier_hz > 0) || !(slope_hz_per_s > 0) || !(sweep_time_s > 0) || !(pri_s > 0) || !(bandwidth_hz > 0) ||
      !(sample_rate_hz > 0) || pulses < 1 || samples < 1 || receivers < 1) {
    throw std::invalid_argument("radar parameters must be positive");
  }
  if (static_cast<double>(samples) / sample_rate_hz > sweep_time_s * (1.0 + 1e-12)) {
    throw std::invalid_argument("fast-time record is longer than the sweep");
  }
  if (std::abs(bandwidth_hz - slope_hz_per_s * sweep_time_s) > 0.01 * bandwidth_hz) {
    throw std::invalid_argument("bandwidth disagrees with slope times sweep time");
  }
}

RadarParams parse_radar_params(std::istream& in) {
  RadarParams p;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("radar params: expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "carrier_hz") p.carrier_hz = parse_number(key, val);
    else if (key == "slope_hz_per_s") p.slope_hz_per_s = parse_number(key, val);
    else if (key == "sweep_time_s") p.sweep_time_s = parse_number(key, val);
    else if (key == "pri_s") p.pri_s = parse_number(key, val);
    else if (key == "bandwidth_hz") p.bandwidth_hz = parse_number(key, val);
    else if (key == "sample_rate_hz") p.sample_rate_hz = parse_number(key, val);
    else if (key == "pulses") p.pulses = parse_count(key, val);
    else if (key == "samples") p.samples = parse_count(key, val);
    else if (key == "receivers") p.receivers = parse_count(key, val);
    else throw std::invalid_argument("radar params: unknown key '" + key + "'");
  }
  p.validate();
  return p;
}

RadarParams load_radar_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open radar params " + path.string());
  return parse_radar_params(in);
}

IqFormat parse_iq_format(const std::string& descriptor) {
  IqFormat f;
  std::stringstream ss(descriptor);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      if (tok == "int16") f.type = SampleType::Int16;
      else if (tok == "float32") f.type = SampleType::Float32;
      else if (tok == "iq") f.q_first = false;
      else if (tok == "qi") f.q_first = true;
      else throw std::invalid_argument("iq format: unknown token '" + tok + "'");
      continue;
    }
    const std::string key = trim(tok.substr(0, eq));
    const std::string val = trim(tok.substr(eq + 1));
    if (key == "frame") f.frame_length = parse_count(key, val);
    else if (key == "channels") f.channels = parse_count(key, val);
    else if (key == "frames") f.expected_frames = parse_count(key, val);
    else if (key == "layout") {
      if (val == "frame") f.layout = ChannelLayout::FrameMajor;
      else if (val == "sample") f.layout = ChannelLayout::SampleMajor;
      else throw std::invalid_argument("iq format: layout must be frame or sample");
    } else {
      throw std::invalid_argument("iq format: unknown key '" + key + "'");
    }
  }
  return f;
}

IqCapture load_iq(const std::filesystem::path& path, const IqFormat& format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open capture " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw std::runtime_error("read error on " + path.string());

  const std::size_t complex_bytes = 2 * format.sample_bytes();
  if (bytes.size() % complex_bytes != 0) {
    throw std::invalid_argument("capture size " + std::to_string(bytes.size()) +
                                " bytes is not a whole number of " + std::to_string(complex_bytes) +
                                "-byte complex samples; check the sample width");
  }
  const std::size_t n = static_cast<std::size_t>(format.frame_length);
  const std::size_t l = static_cast<std::size_t>(format.channels);
  const std::size_t unit = complex_bytes * n * l;
  const std::size_t whole = bytes.size() / unit;

  IqCapture cap;
  if (bytes.size() % unit != 0) {
    cap.warnings.push_back("dropped partial trailing frame of " + std::to_string(bytes.size() % unit) + " bytes");
  }
  if (format.expected_frames && static_cast<long>(whole) != *format.expected_frames) {
    throw std::invalid_argument("capture holds " + std::to_string(whole) + " frames, descriptor expects " +
                                std::to_string(*format.expected_frames));
  }

  auto value_at = [&](std::size_t offset) -> double {
    if (format.type == SampleType::Int16) {
      std::int16_t v;
      std::memcpy(&v, bytes.data() + offset, sizeof v);
      return static_cast<double>(v);
    }
    float v;
    std::memcpy(&v, bytes.data() + offset, sizeof v);
    return static_cast<double>(v);
  };

  const std::size_t w = format.sample_bytes();
  for (std::size_t f = 0; f < whole; ++f) {
    for (std::size_t c = 0; c < l; ++c) {
      IqFrame frame;
      frame.frame = static_cast<long>(f);
      frame.channel = static_cast<long>(c);
      frame.samples.resize(static_cast<Eigen::Index>(n));
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t index = format.layout == ChannelLayout::FrameMajor ? (f * l + c) * n + s : (f * n + s) * l + c;
        const double first = value_at(index * complex_bytes);
        const double second = value_at(index * complex_bytes + w);
        if (!std::isfinite(first) || !std::isfinite(second)) {
          throw std::invalid_argument("non-finite sample in frame " + std::to_string(f));
        }
        frame.samples[static_cast<Eigen::Index>(s)] = format.q_first ? Complex(second, first) : Complex(first, second);
      }
      cap.frames.push_back(std::move(frame));
    }
  }
  return cap;
}

void write_iq(const std::filesystem::path& path, const std::vector<IqFrame>& frames, const IqFormat& format) {
  const std::size_t n = static_cast<std::size_t>(format.frame_length);
  const std::size_t l = static_cast<std::size_t>(format.channels);
  if (frames.size() % l != 0) throw std::invalid_argument("write_iq: frame count is not a multiple of channels");
  for (const auto& fr : frames) {
    if (static_cast<std::size_t>(fr.samples.size()) != n) throw std::invalid_argument("write_iq: frame length mismatch");
  }
  const std::size_t w = format.sample_bytes();
  const std::size_t complex_bytes = 2 * w;
  std::vector<char> bytes(frames.size() * n * complex_bytes);

  auto put = [&](std::size_t offset, double v) {
    if (format.type == SampleType::Int16) {
      const double r = std::nearbyint(v);
      if (!(r >= -32768.0 && r <= 32767.0)) throw std::invalid_argument("write_iq: value out of int16 range");
      const auto s = static_cast<std::int16_t>(r);
      std::memcpy(bytes.data() + offset, &s, sizeof s);
    } else {
      const auto s = static_cast<float>(v);
      std::memcpy(bytes.data() + offset, &s, sizeof s);
    }
  };

  for (std::size_t k = 0; k < frames.size(); ++k) {
    const std::size_t f = k / l, c = k % l;
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t index = format.layout == ChannelLayout::FrameMajor ? (f * l + c) * n + s : (f * n + s) * l + c;
      const Complex z = frames[k].samples[static_cast<Eigen::Index>(s)];
      put(index * complex_bytes, format.q_first ? z.imag() : z.real());
      put(index * complex_bytes + w, format.q_first ? z.real() : z.imag());
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

double estimate_noise_variance(const CVector& frame) {
  if (frame.size() < 32) throw std::invalid_argument("estimate_noise_variance: need at least 32 samples");
  if ((frame.array() == Complex(0.0, 0.0)).all()) throw std::invalid_argument("estimate_noise_variance: all-zero frame");
  return periodogram_noise_variance(frame);
}

double beat_frequency_to_range(double beat_hz, const RadarParams& params) {
  if (!(params.slope_hz_per_s > 0)) throw std::invalid_argument("slope must be positive");
  return kSpeedOfLight * beat_hz / (2.0 * params.slope_hz_per_s);
}

double omega_to_range(double omega, const RadarParams& params) {
  return beat_frequency_to_range(omega * params.sample_rate_hz / kTwoPi, params);
}

double range_to_omega(double range_m, const RadarParams& params) {
  if (!(params.slope_hz_per_s > 0)) throw std::invalid_argument("slope must be positive");
  const double beat = 2.0 * params.slope_hz_per_s * range_m / kSpeedOfLight;
  return kTwoPi * beat / params.sample_rate_hz;
}

std::vector<FrameProfile> range_profile(const std::vector<IqFrame>& frames, const RadarParams& params,
                                        const RangeProfileOptions& options) {
  if (!(params.slope_hz_per_s > 0)) throw std::invalid_argument("range_profile: slope must be positive");
  std::vector<FrameProfile> out;
  for (const auto& fr : frames) {
    FrameProfile prof;
    prof.frame = fr.frame;
    prof.channel = fr.channel;
    prof.sigma2 = options.sigma2 ? *options.sigma2 : estimate_noise_variance(fr.samples);
    GnompConfig cfg = options.gnomp;
    cfg.sigma = std::sqrt(prof.sigma2);
    const QuantizedObservation obs = quantize_complex(fr.samples, options.quantizer);
    const GnompResult r = extract_spectrum(obs, cfg);
    if (cfg.sigma_mode == SigmaMode::Unknown) prof.sigma2 = r.sigma * r.sigma;
    for (std::size_t i = 0; i < r.components.size(); ++i) {
      RangeDetection d;
      d.omega = r.components[i].omega;
      d.range_m = omega_to_range(d.omega, params);
      d.amp = r.components[i].amp;
      d.statistic = i < r.detection_statistic.size() ? r.detection_statistic[i] : 0.0;
      prof.detections.push_back(d);
    }
    out.push_back(std::move(prof));
  }
  return out;
}

CVector synthesize_frame(const RadarParams& params, const std::vector<SyntheticTarget>& targets, double sigma2,
                         std::mt19937_64& rng) {
  ComponentList comps;
  for (const auto& t : targets) comps.push_back({wrap_angle(range_to_omega(t.range_m, params)), t.amp});
  CVector y = SensingModel{}.synthesize(comps, params.samples);
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5 * sigma2));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double re = nd(rng);
    const double im = nd(rng);
    y[i] += Complex(re, im);
  }
  return y;
}

}  // namespace qlsed
