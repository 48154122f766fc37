#include "cachebeam/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cachebeam {

double SystemConfig::subfile_rate_bps() const {
  return file_size_bits / (slot_duration_s * static_cast<double>(subfiles));
}

double SystemConfig::library_bits() const {
  return static_cast<double>(num_files) * file_size_bits;
}

double SystemConfig::qos_rate_bpshz() const { return qos_rate_bps / bandwidth_hz; }

double SystemConfig::tol_rate_bpshz() const { return secrecy_rate_tol_bps / bandwidth_hz; }

double SystemConfig::sinr_target() const { return std::exp2(qos_rate_bpshz()) - 1.0; }

double SystemConfig::secrecy_kappa_tol() const { return std::exp2(tol_rate_bpshz()) - 1.0; }

void SystemConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (num_bs < 1 || num_bs > 7) fail("num_bs must be in [1, 7] (hex cell with center + 6 neighbors)");
  if (antennas_per_bs < 1) fail("antennas_per_bs must be >= 1");
  if (er_antennas < 1) fail("er_antennas must be >= 1");
  if (num_lr < 1) fail("num_lr must be >= 1");
  if (num_files < 1) fail("num_files must be >= 1");
  if (!(file_size_bits > 0)) fail("file_size_bits must be > 0");
  if (subfiles < 1) fail("subfiles must be >= 1");
  if (!(slot_duration_s > 0)) fail("slot_duration_s must be > 0");
  if (!(bandwidth_hz > 0)) fail("bandwidth_hz must be > 0");
  if (!(noise_power_w > 0)) fail("noise_power_w must be > 0");
  if (!(er_noise_power_w > 0)) fail("er_noise_power_w must be > 0");
  if (!(max_tx_power_w > 0)) fail("max_tx_power_w must be > 0");
  if (cache_capacity_bits < 0) fail("cache_capacity_bits must be >= 0");
  if (!(qos_rate_bps > 0)) fail("qos_rate_bps must be > 0");
  if (!(secrecy_rate_tol_bps > 0) || secrecy_rate_tol_bps >= qos_rate_bps)
    fail("secrecy_rate_tol_bps must satisfy 0 < R_tol < R_req");
  if (!(zipf_exponent > 0)) fail("zipf_exponent must be > 0");
  if (normalized_csi_error < 0) fail("normalized_csi_error must be >= 0");
  if (!(inter_bs_distance_m > 0)) fail("inter_bs_distance_m must be > 0");
  if (min_rx_distance_m < 0 || min_rx_distance_m >= inter_bs_distance_m / 3.0)
    fail("min_rx_distance_m must be in [0, inter_bs_distance_m/3)");
  if (num_training_scenarios < 1) fail("num_training_scenarios must be >= 1");
  if (backhaul_distribution.empty()) fail("backhaul_distribution must be nonempty");
  double psum = 0.0;
  for (const auto& a : backhaul_distribution) {
    if (a.rate_bps < 0) fail("backhaul_distribution rates must be >= 0");
    if (a.prob < 0) fail("backhaul_distribution probabilities must be >= 0");
    psum += a.prob;
  }
  if (std::abs(psum - 1.0) > 1e-9) fail("backhaul_distribution probabilities must sum to 1");
}

SystemConfig default_config() { return SystemConfig{}; }

SystemConfig reduced_config() {
  SystemConfig cfg;
  cfg.num_bs = 3;
  cfg.antennas_per_bs = 2;
  cfg.num_lr = 2;
  cfg.num_files = 4;
  cfg.num_training_scenarios = 10;
  cfg.cache_capacity_bits = 0.5 * cfg.library_bits();
  return cfg;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_num(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (trim(v.substr(pos)) != "") throw std::invalid_argument("trailing junk");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad numeric value for key '" + key + "': " + v);
  }
}

int parse_int(const std::string& key, const std::string& v) {
  double x = parse_num(key, v);
  int i = static_cast<int>(std::llround(x));
  if (std::abs(x - i) > 1e-9)
    throw std::invalid_argument("config: key '" + key + "' expects an integer, got " + v);
  return i;
}

std::vector<BackhaulAtom> parse_backhaul(const std::string& v) {
  std::vector<BackhaulAtom> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("config: backhaul_distribution entries must be rate:prob, got " + item);
    BackhaulAtom a;
    a.rate_bps = parse_num("backhaul_distribution", trim(item.substr(0, colon)));
    a.prob = parse_num("backhaul_distribution", trim(item.substr(colon + 1)));
    out.push_back(a);
  }
  if (out.empty()) throw std::invalid_argument("config: backhaul_distribution is empty");
  return out;
}

}  // namespace

SystemConfig parse_config_text(const std::string& text) {
  SystemConfig cfg;
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (kv.count(key))
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    kv[key] = val;
  }

  auto take = [&kv](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto num = [&](const std::string& key, double& field) {
    if (const std::string* v = take(key)) field = parse_num(key, *v);
  };
  auto integer = [&](const std::string& key, int& field) {
    if (const std::string* v = take(key)) field = parse_int(key, *v);
  };

  integer("num_bs", cfg.num_bs);
  integer("antennas_per_bs", cfg.antennas_per_bs);
  integer("er_antennas", cfg.er_antennas);
  integer("num_lr", cfg.num_lr);
  integer("num_files", cfg.num_files);
  num("file_size_bits", cfg.file_size_bits);
  if (const std::string* v = take("subfiles")) {
    double x = parse_num("subfiles", *v);
    cfg.subfiles = static_cast<std::int64_t>(std::llround(x));
    if (std::abs(x - static_cast<double>(cfg.subfiles)) > 1e-6)
      throw std::invalid_argument("config: key 'subfiles' expects an integer");
  }
  num("slot_duration_s", cfg.slot_duration_s);
  num("bandwidth_hz", cfg.bandwidth_hz);
  num("noise_power_w", cfg.noise_power_w);
  num("er_noise_power_w", cfg.er_noise_power_w);
  num("max_tx_power_w", cfg.max_tx_power_w);
  num("cache_capacity_bits", cfg.cache_capacity_bits);
  num("qos_rate_bps", cfg.qos_rate_bps);
  num("secrecy_rate_tol_bps", cfg.secrecy_rate_tol_bps);
  num("zipf_exponent", cfg.zipf_exponent);
  num("normalized_csi_error", cfg.normalized_csi_error);
  num("inter_bs_distance_m", cfg.inter_bs_distance_m);
  num("min_rx_distance_m", cfg.min_rx_distance_m);
  integer("num_training_scenarios", cfg.num_training_scenarios);
  if (const std::string* v = take("backhaul_distribution"))
    cfg.backhaul_distribution = parse_backhaul(*v);

  // Convenience keys, applied after base keys so unit conversions see the
  // final bandwidth / library size.
  if (const std::string* v = take("max_tx_power_dbm"))
    cfg.max_tx_power_w = std::pow(10.0, (parse_num("max_tx_power_dbm", *v) - 30.0) / 10.0);
  if (const std::string* v = take("noise_density_dbm_per_hz")) {
    double w = std::pow(10.0, (parse_num("noise_density_dbm_per_hz", *v) - 30.0) / 10.0) * cfg.bandwidth_hz;
    cfg.noise_power_w = w;
    cfg.er_noise_power_w = w;
  }
  if (const std::string* v = take("cache_capacity_fraction"))
    cfg.cache_capacity_bits = parse_num("cache_capacity_fraction", *v) * cfg.library_bits();

  static const char* known[] = {
      "num_bs", "antennas_per_bs", "er_antennas", "num_lr", "num_files",
      "file_size_bits", "subfiles", "slot_duration_s", "bandwidth_hz",
      "noise_power_w", "er_noise_power_w", "max_tx_power_w", "cache_capacity_bits",
      "qos_rate_bps", "secrecy_rate_tol_bps", "zipf_exponent", "normalized_csi_error",
      "inter_bs_distance_m", "min_rx_distance_m", "num_training_scenarios",
      "backhaul_distribution", "max_tx_power_dbm", "noise_density_dbm_per_hz",
      "cache_capacity_fraction"};
  for (const auto& [key, val] : kv) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("config: unknown key '" + key + "'");
  }

  cfg.validate();
  return cfg;
}

SystemConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const SystemConfig& cfg) {
  char buf[128];
  std::string out;
  auto emit_num = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key, v);
    out += buf;
  };
  auto emit_int = [&](const char* key, long long v) {
    std::snprintf(buf, sizeof(buf), "%s = %lld\n", key, v);
    out += buf;
  };
  emit_int("num_bs", cfg.num_bs);
  emit_int("antennas_per_bs", cfg.antennas_per_bs);
  emit_int("er_antennas", cfg.er_antennas);
  emit_int("num_lr", cfg.num_lr);
  emit_int("num_files", cfg.num_files);
  emit_num("file_size_bits", cfg.file_size_bits);
  emit_int("subfiles", cfg.subfiles);
  emit_num("slot_duration_s", cfg.slot_duration_s);
  emit_num("bandwidth_hz", cfg.bandwidth_hz);
  emit_num("noise_power_w", cfg.noise_power_w);
  emit_num("er_noise_power_w", cfg.er_noise_power_w);
  emit_num("max_tx_power_w", cfg.max_tx_power_w);
  emit_num("cache_capacity_bits", cfg.cache_capacity_bits);
  emit_num("qos_rate_bps", cfg.qos_rate_bps);
  emit_num("secrecy_rate_tol_bps", cfg.secrecy_rate_tol_bps);
  emit_num("zipf_exponent", cfg.zipf_exponent);
  emit_num("normalized_csi_error", cfg.normalized_csi_error);
  emit_num("inter_bs_distance_m", cfg.inter_bs_distance_m);
  emit_num("min_rx_distance_m", cfg.min_rx_distance_m);
  emit_int("num_training_scenarios", cfg.num_training_scenarios);
  out += "backhaul_distribution = ";
  for (std::size_t i = 0; i < cfg.backhaul_distribution.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s%.17g:%.17g", i ? ", " : "",
                  cfg.backhaul_distribution[i].rate_bps, cfg.backhaul_distribution[i].prob);
    out += buf;
  }
  out += "\n";
  return out;
}

std::string config_hash(const SystemConfig& cfg) {
  std::string s = serialize_config(cfg);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cachebeam
