#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cachebeam/config.hpp"
#include "cachebeam/rng.hpp"

namespace cachebeam {

// BS / receiver placement for one drop. BS 0 sits at the origin, BSs 1..M-1 at
// the first M-1 neighbor centers of the hexagonal grid (angles 0, 60, ... deg,
// distance inter_bs_distance_m). Receivers are uniform over the union of the
// M hexagonal cells, at least min_rx_distance_m from every BS.
struct Topology {
  Eigen::Matrix2Xd bs_positions;  // 2 x M
  Eigen::Matrix2Xd lr_positions;  // 2 x K
  Eigen::Vector2d er_position;
};

struct Request {
  int lr = 0;    // receiver index
  int file = 0;  // requested file
};

// One delivery (or training) snapshot. Channels are stored normalized: LR
// channels divided by sqrt(noise_power_w), ER channels by
// sqrt(er_noise_power_w), so every consumer works at unit noise power.
struct Scenario {
  Topology topology;
  std::vector<Request> requests;                // one per LR, lr == index
  std::vector<Eigen::VectorXcd> lr_channels;    // K vectors of length M*Nt (BS-major)
  Eigen::MatrixXcd er_true;                     // G,     M*Nt x Ne
  Eigen::MatrixXcd er_est;                      // G_hat, M*Nt x Ne
  Eigen::MatrixXcd er_err;                      // G - G_hat, ||.||_F <= eps
  double eps = 0.0;                             // CSI uncertainty radius (normalized)
  Eigen::VectorXd backhaul_bps;                 // M, physical bits/s
};

// Zipf popularity theta_f = f^-kappa / sum_j j^-kappa (1-based ranks).
Eigen::VectorXd zipf_popularity(int num_files, double exponent);

// Urban-macro style distance law: PL(dB) = 128.1 + 37.6 log10(d_km); returns
// the linear power gain 10^(-PL/10). Requires d_m > 0.
double path_loss_gain(double distance_m);

// Membership test for the union of the M grid cells (hexagon of circumradius
// inter_bs/sqrt(3) around each BS).
bool in_cell_union(const Eigen::Matrix2Xd& bs_positions, double inter_bs_m,
                   const Eigen::Vector2d& p);

// Draw order: K LR positions, then the ER position (identical distribution).
// Each position costs a variable number of (x, y) uniform pairs (rejection);
// throws std::runtime_error after 1e6 rejected attempts.
Topology generate_topology(const SystemConfig& cfg, RandomStream& rng);

// Draw order: K file requests; per LR the M*Nt channel entries (BS-major);
// ER true channel column-major; if alpha^2 > 0 the error direction
// (column-major) followed by one radius uniform; M backhaul draws.
Scenario generate_scenario(const SystemConfig& cfg, const Topology& topology,
                           const Eigen::VectorXd& popularity, RandomStream& rng);

// One-shot draw: fresh topology + snapshot from a single seed (Zipf
// popularity from the config).
Scenario generate_scenario(const SystemConfig& cfg, std::uint64_t seed);

// Single draws, exposed for statistical tests.
int sample_file(const Eigen::VectorXd& popularity, RandomStream& rng);
double sample_backhaul(const SystemConfig& cfg, RandomStream& rng);

// Distinct requested files, ascending.
std::vector<int> requested_files(const Scenario& sc);
// Streams (request indices) per requested file, aligned with requested_files.
std::vector<std::vector<int>> streams_per_file(const Scenario& sc);

// Text fixture round-trip (hex floats, bit-exact). The header carries the
// config hash; load rejects fixtures stamped with a different hash.
std::string serialize_scenario(const SystemConfig& cfg, const Scenario& sc);
Scenario parse_scenario(const SystemConfig& cfg, const std::string& text);

}  // namespace cachebeam
