#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cachebeam {

// One atom of the finite backhaul-capacity distribution.
struct BackhaulAtom {
  double rate_bps = 0.0;
  double prob = 0.0;
};

// Static system description. All values are SI (watts, bits, seconds, Hz,
// meters). Channel noise is kept here in physical units; scenario generation
// normalizes channels so that downstream optimization sees unit noise power.
struct SystemConfig {
  int num_bs = 7;              // M, base stations on the hex grid (1..7)
  int antennas_per_bs = 4;     // Nt
  int er_antennas = 2;         // Ne, eavesdropper antennas
  int num_lr = 5;              // K, legitimate receivers per slot
  int num_files = 10;          // F
  double file_size_bits = 4.0e9;    // V_f (500 MB)
  std::int64_t subfiles = 270000;   // L = 45 min / 10 ms
  double slot_duration_s = 0.01;    // tau
  double bandwidth_hz = 1.0e7;
  double noise_power_w = 5.495408738576248e-14;     // -172.6 dBm/Hz * 10 MHz
  double er_noise_power_w = 5.495408738576248e-14;
  double max_tx_power_w = 63.09573444801933;        // 48 dBm
  double cache_capacity_bits = 2.0e10;              // per-BS, default 50% of library
  double qos_rate_bps = 1.65e6;        // R_req
  double secrecy_rate_tol_bps = 1.5e5; // R_tol
  double zipf_exponent = 1.1;
  double normalized_csi_error = 0.05;  // alpha^2 = eps^2 / ||G||_F^2
  double inter_bs_distance_m = 500.0;
  double min_rx_distance_m = 50.0;
  int num_training_scenarios = 50;     // Omega
  std::vector<BackhaulAtom> backhaul_distribution = {
      {0.0, 0.3}, {3.0e6, 0.4}, {6.0e6, 0.3}};

  // Derived quantities.
  double subfile_rate_bps() const;   // Q_f = V_f / (tau * L)
  double library_bits() const;       // F * V_f
  double qos_rate_bpshz() const;     // R_req / bandwidth
  double tol_rate_bpshz() const;     // R_tol / bandwidth
  double sinr_target() const;        // kappa_req = 2^(R_req/BW) - 1
  double secrecy_kappa_tol() const;  // 2^(R_tol/BW) - 1, in unit-noise scaling

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

SystemConfig default_config();
SystemConfig reduced_config();  // small instance used by fast tests

// Flat key-value text format, `key = value` per line, '#' comments. Unknown
// keys raise std::invalid_argument naming the key; absent keys keep Table-like
// defaults. Convenience keys (max_tx_power_dbm, noise_density_dbm_per_hz,
// cache_capacity_fraction) are applied after all base keys.
SystemConfig parse_config_text(const std::string& text);
SystemConfig parse_config_file(const std::string& path);
std::string serialize_config(const SystemConfig& cfg);

// FNV-1a hash of the serialized config, as fixed-width hex; stamped into
// fixture headers so stale artifacts are rejected.
std::string config_hash(const SystemConfig& cfg);

}  // namespace cachebeam
