#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cachebeam/config.hpp"
#include "cachebeam/model.hpp"
#include "cachebeam/sdp.hpp"

namespace cachebeam {

// Scenario-derived quantities shared by the delivery program (fixed
// cooperation flags) and the cache-training program (relaxed flags).
// Everything is expressed in unit-noise units: scenario channels are already
// divided by the respective noise standard deviations, so sigma^2 and
// sigma_e^2 are both 1 here and the secrecy threshold folds the ER noise in.
struct ConstraintSet {
  int n = 0;            // stacked coordinated array size, num_bs * antennas_per_bs
  int num_bs = 0;
  int num_lr = 0;
  int er_antennas = 0;
  double max_tx_power_w = 0.0;
  double sinr_target = 0.0;    // kappa_req = 2^(R_req/BW) - 1, per LR
  double secrecy_kappa = 0.0;  // kappa_tol = sigma_e^2 (2^(R_tol/BW) - 1), unit noise
  double an_weight = 0.0;      // kappa_tol / sigma_e^2
  double csi_radius = 0.0;     // eps_e, Frobenius radius of the ER error ball

  std::vector<Eigen::MatrixXcd> channel_outer;  // H_rho = h_rho h_rho^H, per LR
  std::vector<Eigen::MatrixXd> bs_selector;     // Lambda_m, diagonal 0/1, sum = I
  Eigen::MatrixXcd er_estimate;                 // Ghat, n x Ne
  Eigen::MatrixXcd robust_stack;                // U_e = [Ghat, I_n], n x (Ne + n)
  std::vector<int> stream_files;                // file requested by each LR stream

  static ConstraintSet from_scenario(const SystemConfig& cfg, const Scenario& sc);
};

// Variable layout of an assembled delivery program: block/scalar indices into
// the SdpProblem, so solutions can be unpacked without name lookups.
struct DeliveryLayout {
  std::vector<int> w_blocks;   // per LR, embedded 2n x 2n PSD block
  int v_block = -1;            // embedded AN covariance block
  std::vector<int> delta_w;  // per LR slack (robust mode), else empty
};

enum class SecrecyMode { Robust, Perfect };

// Individual constraint emitters; `prob` must already hold the blocks named
// by `layout`. `q` has one entry per (requested stream, BS) as flags in [0,1].
void add_power_constraints(SdpProblem& prob, const DeliveryLayout& layout,
                           const ConstraintSet& set);
void add_sinr_constraints(SdpProblem& prob, const DeliveryLayout& layout,
                          const ConstraintSet& set);
void add_bigm_constraints(SdpProblem& prob, const DeliveryLayout& layout,
                          const ConstraintSet& set,
                          const Eigen::MatrixXd& q_by_stream_bs);
void add_robust_secrecy(SdpProblem& prob, DeliveryLayout& layout,
                        const ConstraintSet& set);
void add_perfect_secrecy(SdpProblem& prob, const DeliveryLayout& layout,
                         const ConstraintSet& set, const Eigen::MatrixXcd& g);

// Full delivery program for fixed cooperation flags q (num_lr x num_bs, the
// per-stream rows already mapped from per-file flags). Objective is the total
// transmit power sum tr(W_rho) + tr(V) in watts. Backhaul limits are handled
// by the caller's cooperation search, not here.
SdpProblem assemble_delivery(const ConstraintSet& set, const Eigen::MatrixXd& q_by_stream_bs,
                             SecrecyMode mode, DeliveryLayout& layout,
                             const Eigen::MatrixXcd* perfect_g = nullptr);

// Unpacked (complex) solution of an assembled delivery program.
struct DeliveryVars {
  std::vector<Eigen::MatrixXcd> W;  // per LR
  Eigen::MatrixXcd V;
  Eigen::VectorXd delta;  // empty in perfect mode
};

DeliveryVars unpack_delivery(const ConstraintSet& set, const DeliveryLayout& layout,
                             const SdpSolution& sol);

}  // namespace cachebeam
