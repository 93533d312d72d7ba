#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qlsed/experiments.hpp"

namespace qlsed {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string t = s.substr(b, e - b);
  if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) t = t.substr(1, t.size() - 2);
  return t;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  return d;
}

long to_long(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) throw std::invalid_argument("config: expected an integer for " + key);
  return static_cast<long>(d);
}

// "a, b, c", "[a, b]" or "start:stop:step" (inclusive of stop up to rounding).
std::vector<std::string> split_list(const std::string& raw) {
  std::string v = trim(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') throw std::invalid_argument("config: unterminated list '" + raw + "'");
    v = v.substr(1, v.size() - 2);
  }
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  const std::string v = trim(raw);
  if (v.find(':') != std::string::npos && v.front() != '[') {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(trim(p));
    if (parts.size() != 3) throw std::invalid_argument("config: range for " + key + " must be start:stop:step");
    const double a = to_double(key, parts[0]), b = to_double(key, parts[1]), step = to_double(key, parts[2]);
    if (!(step > 0.0) || b < a) throw std::invalid_argument("config: bad range for " + key);
    const long count = static_cast<long>(std::floor((b - a) / step + 1e-9)) + 1;
    for (long i = 0; i < count; ++i) out.push_back(a + step * static_cast<double>(i));
    return out;
  }
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  return out;
}

}  // namespace

ExperimentSpec parse_experiment_spec(std::istream& in) {
  ExperimentSpec s;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "scenario") {
      s.scenario = lower(val);
      if (s.scenario != "gnomp" && s.scenario != "rao_single") {
        throw std::invalid_argument("config: unknown scenario '" + val + "'");
      }
    } else if (key == "n") {
      s.n = to_long(key, val);
    } else if (key == "k") {
      s.k = static_cast<int>(to_long(key, val));
    } else if (key == "frequencies") {
      if (lower(val) == "random") s.frequencies.clear();
      else s.frequencies = to_doubles(key, val);
    } else if (key == "min_separation") {
      s.min_separation = to_double(key, val);
    } else if (key == "snr_db") {
      s.snr_db = to_doubles(key, val);
    } else if (key == "sweep_target") {
      s.sweep_target = static_cast<int>(to_long(key, val));
    } else if (key == "sweep_snr_db") {
      s.sweep_snr_db = to_doubles(key, val);
    } else if (key == "bits" || key == "bit_depth") {
      s.bits.clear();
      for (const auto& item : split_list(val)) s.bits.push_back(parse_bit_depth(item));
    } else if (key == "p_fa") {
      s.p_fa = to_doubles(key, val);
    } else if (key == "trials") {
      s.trials = to_long(key, val);
    } else if (key == "seed") {
      s.seed = static_cast<std::uint64_t>(std::stoull(val));
    } else if (key == "full_scale_rule") {
      s.full_scale_rule = lower(val);
      if (s.full_scale_rule != "paper_max_rule" && s.full_scale_rule != "full_scale") {
        throw std::invalid_argument("config: full_scale_rule must be paper_max_rule or full_scale");
      }
    } else if (key == "full_scale") {
      s.full_scale = to_double(key, val);
      s.full_scale_rule = "full_scale";
    } else if (key == "measurement") {
      const std::string m = lower(val);
      if (m == "uniform") s.measurement = Measurement::Uniform;
      else if (m == "signed") s.measurement = Measurement::Signed;
      else if (m == "compressive") s.measurement = Measurement::Compressive;
      else throw std::invalid_argument("config: unknown measurement '" + val + "'");
    } else if (key == "compressive_m") {
      s.compressive_m = to_long(key, val);
    } else if (key == "sigma2") {
      s.sigma2 = to_double(key, val);
    } else if (key == "sigma_mode") {
      const std::string m = lower(val);
      if (m == "known") s.sigma_mode = SigmaMode::Known;
      else if (m == "unknown") s.sigma_mode = SigmaMode::Unknown;
      else throw std::invalid_argument("config: sigma_mode must be known or unknown");
    } else if (key == "oversample") {
      s.oversample = static_cast<int>(to_long(key, val));
    } else if (key == "stop_rule") {
      const std::string m = lower(val);
      if (m == "cfar") s.stop = StopRule::Cfar;
      else if (m == "bic") s.stop = StopRule::Bic;
      else throw std::invalid_argument("config: stop_rule must be cfar or bic");
    } else if (key == "threshold_omega") {
      s.threshold_omega = to_double(key, val);
    } else if (key == "threshold_amp") {
      s.threshold_amp = to_double(key, val);
    } else if (key == "threads") {
      s.threads = static_cast<int>(to_long(key, val));
    } else if (key == "trace_trials") {
      s.trace_trials = static_cast<int>(to_long(key, val));
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }

  if (s.n < 2) throw std::invalid_argument("config: n must be >= 2");
  if (s.k < 0) throw std::invalid_argument("config: k must be >= 0");
  if (s.trials < 0) throw std::invalid_argument("config: trials must be >= 0");
  if (!s.frequencies.empty() && static_cast<int>(s.frequencies.size()) != s.k) {
    throw std::invalid_argument("config: frequencies list must have k entries");
  }
  if (s.snr_db.size() > 1 && static_cast<int>(s.snr_db.size()) != s.k) {
    throw std::invalid_argument("config: snr_db must have one entry or k entries");
  }
  if (s.sweep_target < 0 || s.sweep_target > s.k) throw std::invalid_argument("config: sweep_target out of range");
  for (double p : s.p_fa) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("config: p_fa values must lie in (0, 1)");
  }
  if (!(s.sigma2 > 0.0)) throw std::invalid_argument("config: sigma2 must be positive");
  if (s.measurement == Measurement::Compressive && s.compressive_m < 1) {
    throw std::invalid_argument("config: compressive measurement needs compressive_m >= 1");
  }
  if (s.scenario == "rao_single" && s.k != 1) throw std::invalid_argument("config: rao_single needs k = 1");
  if (s.threads < 1) s.threads = 1;
  return s;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return parse_experiment_spec(in);
}

}  // namespace qlsed
