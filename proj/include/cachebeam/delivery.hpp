#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cachebeam/caching.hpp"
#include "cachebeam/constraints.hpp"
#include "cachebeam/model.hpp"

namespace cachebeam {

// Which BSs cooperate on which requested file, plus the induced backhaul
// loads. Rows follow the ascending list of distinct requested files.
struct CooperationDecision {
  std::vector<int> files;  // distinct requested file ids, ascending
  Eigen::MatrixXd q;       // files x num_bs, binary cooperation flags
  Eigen::MatrixXd b;       // backhaul fractions, b = (1 - c) * q elementwise
  std::vector<std::vector<int>> coop_sets;  // per file row: BS ids with q = 1

  struct Removal {
    int file = 0;  // file id (not row)
    int bs = 0;
    double penalty = 0.0;  // transmit-power increase of the removal
  };
  std::vector<Removal> removal_log;
  int candidate_solves = 0;  // SDPs evaluated while forming the decision

  // Expand per-file rows to per-stream rows (streams = LRs).
  Eigen::MatrixXd stream_flags(const ConstraintSet& set) const;
  // Fill b and coop_sets from q and the cache placement.
  void finalize(const CacheMatrix& cache);
};

// Transmit-side outcome for one slot: relaxed covariances, extracted
// beamformers, artificial-noise covariance and bookkeeping.
struct TransmitSolution {
  enum class Status { Feasible, Infeasible, RankFailure };
  Status status = Status::Infeasible;
  std::vector<Eigen::MatrixXcd> W;  // per LR, unembedded relaxed covariances
  std::vector<Eigen::VectorXcd> w;  // extracted beamformers
  Eigen::MatrixXcd V;               // artificial-noise covariance
  Eigen::VectorXd delta;            // secrecy slack values (robust mode)
  double total_power = 0.0;         // watts, sum ||w||^2 + tr(V) after extraction
  double sdp_objective = 0.0;       // relaxed optimum, watts
  Eigen::VectorXd per_bs_power;     // watts per BS after extraction
  Eigen::VectorXd rank_ratios;      // lambda2/lambda1 per stream covariance
  int sdp_iterations = 0;
  double feas_margin = 0.0;  // from the solver when infeasible
  std::string message;
};

// (1 - cached_fraction) * streaming_rate: backhaul load of serving one file.
double effective_backhaul_rate(double cached_fraction, double stream_rate_bps);

// BS indices whose summed backhaul loads (over files with q = 1) exceed their
// drawn capacities; comparisons carry a 1e-9 relative slack.
std::vector<int> violation_set(const Eigen::MatrixXd& q, const std::vector<int>& files,
                               const CacheMatrix& cache, double stream_rate_bps,
                               const Eigen::VectorXd& backhaul_bps);

// max over delta >= 0 of lambda_min(secrecy LMI slack) for fixed (W, V),
// evaluated in the diag(I, eps*I)-scaled coordinates the solver enforces the
// LMI in; a nonnegative first component means the robust secrecy constraint
// is satisfiable. Second component is the maximizing delta.
std::pair<double, double> secrecy_slack_margin(const ConstraintSet& set,
                                               const Eigen::MatrixXcd& W,
                                               const Eigen::MatrixXcd& V);

// Principal-component extraction. clean = rank ratio within tolerance (or a
// zero matrix, which extracts to the zero vector).
struct ExtractResult {
  Eigen::VectorXcd w;
  double rank_ratio = 0.0;
  bool clean = false;
};
ExtractResult extract_beamformer(const Eigen::MatrixXcd& W, double tol = 1e-4);

// Solve the transmit design for fixed per-stream cooperation flags: relaxed
// SDP, beamformer extraction, Gaussian-randomization fallback. perfect_g
// overrides the channel the Perfect mode secures (defaults to the estimate).
TransmitSolution solve_fixed_cooperation(const ConstraintSet& set,
                                         const Eigen::MatrixXd& stream_flags, SecrecyMode mode,
                                         const SolveOptions& opts = {},
                                         const Eigen::MatrixXcd* perfect_g = nullptr,
                                         std::uint64_t extraction_seed = 0x5eed);

// Greedy cooperation formation: start from full cooperation and repeatedly
// drop the (file, BS) pair with the smallest transmit-power penalty until the
// backhaul constraints hold. Ties break on lowest BS index, then file id.
std::pair<CooperationDecision, TransmitSolution> greedy_delivery(
    const SystemConfig& cfg, const Scenario& sc, const CacheMatrix& cache, SecrecyMode mode,
    const SolveOptions& opts = {}, const Eigen::MatrixXcd* perfect_g = nullptr);

// Exact oracle: enumerate backhaul-feasible binary flag matrices (maximal
// sets only, justified by cooperation monotonicity) and return the best.
// Refuses instances with more than size_cap flag bits.
std::pair<CooperationDecision, TransmitSolution> exhaustive_delivery(
    const SystemConfig& cfg, const Scenario& sc, const CacheMatrix& cache, SecrecyMode mode,
    const SolveOptions& opts = {}, int size_cap = 12);

}  // namespace cachebeam
