#pragma once

// Dechirped FMCW captures: raw IQ file reading, per-frame noise estimation,
// software quantization, extraction and the beat-frequency to range map.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qlsed/gnomp.hpp"

namespace qlsed {

inline constexpr double kSpeedOfLight = 299792458.0;

struct RadarParams {
  double carrier_hz = 77e9;
  // The capture table prints "MHz/s"; MHz/µs is what reproduces its bandwidth
  // over the sweep time, so that is the default.
  double slope_hz_per_s = 29.982e12;
  double sweep_time_s = 60e-6;
  double pri_s = 160e-6;
  double bandwidth_hz = 1798.92e6;
  double sample_rate_hz = 10e6;
  long pulses = 128;
  long samples = 256;
  long receivers = 4;

  /// Throws std::invalid_argument on non-positive fields, a fast-time record
  /// longer than the sweep, or a bandwidth more than 1% away from μ·T_p.
  void validate() const;
};

/// Keys: carrier_hz, slope_hz_per_s, sweep_time_s, pri_s, bandwidth_hz,
/// sample_rate_hz, pulses, samples, receivers. Missing keys keep the defaults.
RadarParams parse_radar_params(std::istream& in);
RadarParams load_radar_params(const std::filesystem::path& path);

enum class SampleType { Int16, Float32 };
enum class ChannelLayout { FrameMajor, SampleMajor };

/// Layout of a raw capture. Descriptor text: comma separated tokens among
/// int16 | float32, iq | qi, frame=<N>, channels=<L>, layout=frame|sample,
/// frames=<count> (optional expected frame count).
struct IqFormat {
  SampleType type = SampleType::Int16;
  bool q_first = false;
  long frame_length = 256;
  long channels = 1;
  ChannelLayout layout = ChannelLayout::FrameMajor;
  std::optional<long> expected_frames;

  std::size_t sample_bytes() const { return type == SampleType::Int16 ? 2 : 4; }
};

IqFormat parse_iq_format(const std::string& descriptor);

struct IqFrame {
  CVector samples;
  long frame = 0;
  long channel = 0;
};

struct IqCapture {
  std::vector<IqFrame> frames;  // capture order: frame major, channel minor
  std::vector<std::string> warnings;
};

/// Reads every complete frame. A partial trailing frame is dropped with a
/// warning; a byte count that is not a whole number of complex samples, a
/// non-finite sample or a frame count differing from expected_frames throws.
IqCapture load_iq(const std::filesystem::path& path, const IqFormat& format);

/// Writes frames in the given layout; int16 values are rounded and must fit.
void write_iq(const std::filesystem::path& path, const std::vector<IqFrame>& frames, const IqFormat& format);

/// Median periodogram bin over ln 2; needs at least 32 samples, not all zero.
double estimate_noise_variance(const CVector& frame);

double beat_frequency_to_range(double beat_hz, const RadarParams& params);
double omega_to_range(double omega, const RadarParams& params);
double range_to_omega(double range_m, const RadarParams& params);

struct RangeDetection {
  double range_m = 0.0;
  double omega = 0.0;
  Complex amp;
  double statistic = 0.0;
};

struct FrameProfile {
  long frame = 0;
  long channel = 0;
  double sigma2 = 0.0;
  std::vector<RangeDetection> detections;
};

struct RangeProfileOptions {
  QuantizerSpec quantizer = make_quantizer(1, 60.0);
  GnompConfig gnomp;
  std::optional<double> sigma2;  // estimated per frame when absent
};

std::vector<FrameProfile> range_profile(const std::vector<IqFrame>& frames, const RadarParams& params,
                                        const RangeProfileOptions& options);

struct SyntheticTarget {
  double range_m = 0.0;
  Complex amp;
};

/// Noisy dechirped frame with one beat tone per target.
CVector synthesize_frame(const RadarParams& params, const std::vector<SyntheticTarget>& targets, double sigma2,
                         std::mt19937_64& rng);

}  // namespace qlsed
