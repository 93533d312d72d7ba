#include "qlsed/quantizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace qlsed {

double QuantizerSpec::threshold(long d) const {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const long b = levels();
  if (d <= 0) return -kInf;
  if (d >= b) return kInf;
  return static_cast<double>(d) * step() - full_scale;
}

double QuantizerSpec::level(long d) const {
  return -full_scale + step() * (static_cast<double>(d) + 0.5);
}

long QuantizerSpec::code(double x) const {
  const long b = levels();
  const double cell = std::floor((x + full_scale) / step());
  if (!(cell >= 0.0)) return 0;  // also catches NaN
  if (cell >= static_cast<double>(b - 1)) return b - 1;
  long d = static_cast<long>(cell);
  // Guard the floor against rounding at an exact threshold.
  while (d + 1 < b && x >= threshold(d + 1)) ++d;
  while (d > 0 && x < threshold(d)) --d;
  return d;
}

double QuantizerSpec::quantize(double x) const { return infinite() ? x : level(code(x)); }

QuantizerSpec make_quantizer(int bit_depth, double full_scale) {
  if (!(full_scale > 0.0) || !std::isfinite(full_scale)) {
    throw std::invalid_argument("make_quantizer: full scale must be positive and finite");
  }
  if (bit_depth != kInfiniteBits && (bit_depth < 1 || bit_depth > 30)) {
    throw std::invalid_argument("make_quantizer: bit depth must be in [1, 30] or infinite");
  }
  return QuantizerSpec{bit_depth, full_scale};
}

int parse_bit_depth(const std::string& text) {
  std::string t;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (t == "inf" || t == "infinite" || t == "infinity") return kInfiniteBits;
  std::size_t used = 0;
  const int b = std::stoi(t, &used);
  if (used != t.size() || b < 1 || b > 30) throw std::invalid_argument("bad bit depth: " + text);
  return b;
}

std::string bit_depth_label(int bit_depth) {
  return bit_depth == kInfiniteBits ? "inf" : std::to_string(bit_depth);
}

double design_full_scale(const std::vector<double>& amplitudes, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("design_full_scale: sigma must be positive");
  double g = 3.0 * sigma / std::numbers::sqrt2;
  for (double a : amplitudes) g = std::max(g, std::abs(a));
  return g;
}

QuantizedObservation quantize_complex(const CVector& signal, const QuantizerSpec& spec) {
  const Vector x = stack_real(signal);
  const Eigen::Index m = x.size();
  QuantizedObservation obs;
  obs.quantizer = ChannelQuantizer(spec);
  obs.lower.resize(m);
  obs.upper.resize(m);
  obs.codes.resize(m);
  Vector out(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (spec.infinite()) {
      obs.lower[i] = obs.upper[i] = out[i] = x[i];
      obs.codes[i] = -1;
      continue;
    }
    const long d = spec.code(x[i]);
    obs.codes[i] = static_cast<int>(d);
    obs.lower[i] = spec.threshold(d);
    obs.upper[i] = spec.threshold(d + 1);
    out[i] = spec.level(d);
  }
  obs.output = unstack_real(out);
  return obs;
}

QuantizedObservation quantize_signed(const CVector& signal, const CVector& thresholds) {
  if (signal.size() != thresholds.size()) throw std::invalid_argument("quantize_signed: length mismatch");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Vector x = stack_real(signal);
  const Vector h = stack_real(thresholds);
  const Eigen::Index m = x.size();
  QuantizedObservation obs;
  obs.quantizer = ChannelQuantizer(make_quantizer(1, 1.0), h);
  obs.lower.resize(m);
  obs.upper.resize(m);
  obs.codes.resize(m);
  Vector out(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool above = x[i] >= h[i];
    obs.codes[i] = above ? 1 : 0;
    obs.lower[i] = above ? h[i] : -kInf;
    obs.upper[i] = above ? kInf : h[i];
    out[i] = above ? 1.0 : -1.0;
  }
  obs.output = unstack_real(out);
  return obs;
}

}  // namespace qlsed
