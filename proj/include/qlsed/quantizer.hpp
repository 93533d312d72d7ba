#pragma once

// Uniform mid-rise B-bit quantizer applied independently to I and Q, the
// signed (time-varying threshold) 1-bit variant, and the interval form of a
// quantized record that the likelihood consumes.

#include <limits>
#include <string>

#include "qlsed/types.hpp"

namespace qlsed {

inline constexpr int kInfiniteBits = std::numeric_limits<int>::max();

struct QuantizerSpec {
  int bit_depth = 1;
  double full_scale = 1.0;

  bool infinite() const { return bit_depth == kInfiniteBits; }
  long levels() const { return infinite() ? 0 : (1L << bit_depth); }
  double step() const { return 2.0 * full_scale / static_cast<double>(levels()); }

  /// τ_d for d = 0..levels(); τ_0 = -inf, τ_b = +inf.
  double threshold(long d) const;
  /// Output level of cell d: -γ + step (d + 1/2).
  double level(long d) const;
  /// Cell index of x; saturates into the outer cells.
  long code(double x) const;
  double quantize(double x) const;
};

/// bit_depth in [1, 30] or kInfiniteBits.
QuantizerSpec make_quantizer(int bit_depth, double full_scale);

/// Parses "1".."30", "inf" or "infinite".
int parse_bit_depth(const std::string& text);
std::string bit_depth_label(int bit_depth);

/// γ = max(max_k |x_k|, 3σ/√2).
double design_full_scale(const std::vector<double>& amplitudes, double sigma);

/// Threshold structure of every stacked channel: a common quantizer whose
/// thresholds are shifted by a per-channel offset (all zero for the uniform
/// quantizer, the dither h_n for signed measurements).
struct ChannelQuantizer {
  QuantizerSpec spec;
  Vector offsets;  // stacked [Re; Im], empty means all zero

  ChannelQuantizer() = default;
  ChannelQuantizer(const QuantizerSpec& s) : spec(s) {}  // NOLINT: implicit on purpose
  ChannelQuantizer(const QuantizerSpec& s, Vector off) : spec(s), offsets(std::move(off)) {}

  double offset(Eigen::Index channel) const { return offsets.size() ? offsets[channel] : 0.0; }
};

/// Interval view of a quantized record, channels stacked as [Re; Im].
/// A channel with lower == upper is an exact (unquantized) sample.
struct QuantizedObservation {
  ChannelQuantizer quantizer;
  Vector lower;
  Vector upper;
  Eigen::VectorXi codes;  // cell index per channel, -1 for exact samples
  CVector output;         // quantizer output levels (signed mode: ±1 per channel)

  Eigen::Index size() const { return lower.size() / 2; }
  Eigen::Index channels() const { return lower.size(); }
  bool exact(Eigen::Index channel) const { return lower[channel] == upper[channel]; }
};

QuantizedObservation quantize_complex(const CVector& signal, const QuantizerSpec& spec);

/// One-bit comparison of each I/Q component against the threshold h_n.
QuantizedObservation quantize_signed(const CVector& signal, const CVector& thresholds);

}  // namespace qlsed
