#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cachebeam/delivery.hpp"

namespace cachebeam {

// ---- ground-truth rate evaluation (unit-noise units, rates in bit/s/Hz) ----

// SINR of stream rho given all stream covariances and the AN covariance.
double lr_sinr(const Eigen::VectorXcd& h, const std::vector<Eigen::MatrixXcd>& W, int rho,
               const Eigen::MatrixXcd& V);
double lr_rate(const Eigen::VectorXcd& h, const std::vector<Eigen::MatrixXcd>& W, int rho,
               const Eigen::MatrixXcd& V);

// Eavesdropper capacity log2 det(I + Z^-1 G^H W G) with Z = I + G^H V G.
double er_capacity(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& w,
                   const Eigen::MatrixXcd& v);

// Sampled lower bound on the worst-case ER capacity over the Frobenius ball
// of radius eps around ghat: n_samples ball points, n_samples sphere points,
// the center, and (optionally) a local ascent refinement from the best hit.
// Only ever used to falsify secrecy claims, never to certify.
double worst_case_er_rate(const Eigen::MatrixXcd& ghat, double eps, const Eigen::MatrixXcd& w,
                          const Eigen::MatrixXcd& v, int n_samples, std::uint64_t seed,
                          bool refine = true);

// ---- schemes --------------------------------------------------------------

enum class CachingScheme { Optimized, NoSecurity, Preference, Uniform };
enum class DeliveryScheme { Greedy, Coordinated, FullCooperation, NonRobust };
const char* to_string(CachingScheme s);
const char* to_string(DeliveryScheme s);
std::string scheme_label(CachingScheme c, DeliveryScheme d);
int scheme_code(CachingScheme c, DeliveryScheme d);

// ---- per-trial evaluation ---------------------------------------------------

struct TrialResult {
  std::string scheme;
  std::uint64_t seed = 0;
  double cache_capacity_bits = 0.0;
  bool feasible = false;
  bool outage = true;
  bool audit_ok = false;
  double total_power_w = std::numeric_limits<double>::quiet_NaN();
  double sdp_objective_w = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd per_bs_power;
  double avg_coop_bs = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd lr_rates;       // achieved, from extracted beamformers
  Eigen::VectorXd worst_case_er;  // sampled worst case over the design ball
  double min_secrecy_rate = std::numeric_limits<double>::quiet_NaN();
  double max_rank_ratio = 0.0;
  int removals = 0;
  int candidate_solves = 0;
  std::string message;
};

// Post-solve verification from extracted quantities. design_er reports the
// ER-side guarantee the scheme actually designed for (worst case over the
// ball in robust mode, the design channel in perfect mode).
struct AuditReport {
  bool ok = false;
  double worst_bs_power_w = 0.0;   // max per-BS power
  double min_sinr = 0.0;           // min over streams
  double max_design_er = 0.0;      // max over streams of the designed-for ER rate
  std::string detail;
};

AuditReport audit_solution(const SystemConfig& cfg, const ConstraintSet& set,
                           const TransmitSolution& ts, SecrecyMode mode,
                           const Eigen::MatrixXcd& design_g, std::uint64_t seed,
                           int er_samples = 1000);

// Baseline assignment: each request goes to its nearest BS with enough
// residual backhaul, in increasing LR order. Returns per-stream flags, or
// empty when some request cannot be served.
Eigen::MatrixXd nearest_bs_assignment(const SystemConfig& cfg, const Scenario& sc,
                                      const CacheMatrix& cache);

// Run one delivery scheme on one prepared scenario.
TrialResult evaluate_delivery(const SystemConfig& cfg, const Scenario& sc,
                              const CacheMatrix& cache, DeliveryScheme scheme,
                              std::uint64_t seed, const SolveOptions& opts = {});

// Generate the scenario from `seed`, then evaluate.
TrialResult run_delivery_trial(const SystemConfig& cfg, const CacheMatrix& cache,
                               DeliveryScheme scheme, std::uint64_t seed,
                               const SolveOptions& opts = {});

double secrecy_outage_probability(const std::vector<TrialResult>& trials);

// ---- sweeps ----------------------------------------------------------------

struct SweepRow {
  double swept_value = 0.0;  // capacity %, alpha^2, or antenna count
  std::string scheme;
  int n_trials = 0;
  int n_feasible = 0;
  double avg_power_w = std::numeric_limits<double>::quiet_NaN();   // mean over feasible
  double avg_power_dbm = std::numeric_limits<double>::quiet_NaN();
  double p_out = std::numeric_limits<double>::quiet_NaN();
  double avg_coop_bs = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t master_seed = 0;
  bool trained = true;  // false when cache training was infeasible
};

// Observer invoked for every finished trial of a sweep: (point index within
// the grid, trial index, result). Used for per-trial dumps.
using TrialSink = std::function<void(int, int, const TrialResult&)>;

// Training scenario set for one sweep point, seeds derived from the master.
std::vector<Scenario> training_scenarios(const SystemConfig& cfg, std::uint64_t master_seed,
                                         int point_index);

// Build the cache for a scheme at the current config (throws TrainingInfeasible).
CacheMatrix build_cache(const SystemConfig& cfg, CachingScheme scheme,
                        std::uint64_t master_seed, int point_index,
                        const SolveOptions& opts = {});

// Monte Carlo block at one sweep point with an already-built cache. Trial t
// gets seed derive(master_seed, trial-tag, point_index, code, t); aggregates
// power/cooperation over feasible trials and outage over all trials.
SweepRow evaluate_sweep_point(const SystemConfig& cfg, const CacheMatrix& cache,
                              DeliveryScheme delivery, int n_trials,
                              std::uint64_t master_seed, int point_index, int code,
                              const std::string& label, const SolveOptions& opts = {},
                              const TrialSink& sink = {});

std::vector<SweepRow> run_cache_sweep(const SystemConfig& cfg, CachingScheme caching,
                                      DeliveryScheme delivery,
                                      const std::vector<double>& capacity_pct_grid,
                                      int n_trials, std::uint64_t master_seed,
                                      const SolveOptions& opts = {},
                                      const TrialSink& sink = {});
std::vector<SweepRow> run_csi_error_sweep(const SystemConfig& cfg, CachingScheme caching,
                                          DeliveryScheme delivery,
                                          const std::vector<double>& alpha2_grid, int n_trials,
                                          std::uint64_t master_seed,
                                          const SolveOptions& opts = {},
                                          const TrialSink& sink = {});
std::vector<SweepRow> run_antenna_sweep(const SystemConfig& cfg, CachingScheme caching,
                                        DeliveryScheme delivery,
                                        const std::vector<double>& nt_grid, int n_trials,
                                        std::uint64_t master_seed,
                                        const SolveOptions& opts = {},
                                        const TrialSink& sink = {});

double watts_to_dbm(double watts);

// Fixed-schema CSV (6-decimal fields, '\n' newlines); write is atomic
// (temp file + rename).
std::string csv_text(const std::vector<SweepRow>& rows);
void write_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace cachebeam
