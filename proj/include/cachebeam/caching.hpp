#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "cachebeam/config.hpp"
#include "cachebeam/constraints.hpp"
#include "cachebeam/model.hpp"
#include "cachebeam/sdp.hpp"

namespace cachebeam {

// Fractional cache placement, one row per library file, one column per BS.
struct CacheMatrix {
  Eigen::MatrixXd c;  // F x M, entries in [0, 1]

  // Per-BS stored bits must respect the capacity; relative slack guards the
  // fractional-knapsack boundary case.
  void validate(const SystemConfig& cfg) const;

  // Plain text table with a config-hash header line so delivery runs can
  // detect cache/config mismatches.
  std::string serialize(const std::string& config_hash) const;
  static CacheMatrix parse(const std::string& text, const std::string& expected_hash = "");
  static CacheMatrix parse_file(const std::string& path, const std::string& expected_hash = "");
};

// Popularity-greedy fractional knapsack per BS: cache the most popular files
// first, splitting the marginal file.
CacheMatrix preference_caching(const SystemConfig& cfg);

// Every file stores the same fraction min(C_max, F*V_f) / (F*V_f).
CacheMatrix uniform_caching(const SystemConfig& cfg);

// Variable indices of the assembled training program.
struct TrainingLayout {
  int num_files = 0;
  int num_bs = 0;
  std::vector<int> c_vars;  // F x M row-major
  struct PerScenario {
    DeliveryLayout delivery;
    std::vector<int> files;   // distinct requested files, ascending
    std::vector<int> q_vars;  // files x M row-major, relaxed cooperation
    std::vector<int> b_vars;  // files x M row-major, backhaul fractions
  };
  std::vector<PerScenario> scen;
};

// Scenario-averaged training program: placement c coupled to per-scenario
// relaxed cooperation/backhaul variables and full transmit-side constraint
// stacks. include_secrecy=false drops the secrecy LMIs (training baseline).
SdpProblem assemble_training(const SystemConfig& cfg, const std::vector<Scenario>& scenarios,
                             bool include_secrecy, TrainingLayout& layout);

struct TrainResult {
  CacheMatrix cache;
  double objective = 0.0;   // scenario-averaged transmit power, watts
  double binariness = 0.0;  // fraction of relaxed cooperation values near {0,1}
  int iterations = 0;
};

// Thrown when the training program has no feasible placement; the diagnosis
// distinguishes a capacity bottleneck from QoS/secrecy infeasibility.
struct TrainingInfeasible : std::runtime_error {
  explicit TrainingInfeasible(const std::string& what) : std::runtime_error(what) {}
};

TrainResult train_cache(const SystemConfig& cfg, const std::vector<Scenario>& scenarios,
                        bool include_secrecy, const SolveOptions& opts = {});

}  // namespace cachebeam
