#include <cstdio>
#include <fstream>
#include <vector>

#include "cachebeam/caching.hpp"
#include "cachebeam/evaluate.hpp"
#include "cachebeam/model.hpp"
#include "doctest.h"

using namespace cachebeam;

namespace {

// Small instance that trains in well under a second.
SystemConfig micro_config(int omega) {
  SystemConfig cfg = reduced_config();
  cfg.num_bs = 2;
  cfg.antennas_per_bs = 1;
  cfg.num_lr = 1;
  cfg.num_files = 2;
  cfg.er_antennas = 1;
  cfg.num_training_scenarios = omega;
  cfg.cache_capacity_bits = 0.5 * cfg.library_bits();
  return cfg;
}

std::vector<Scenario> draws(const SystemConfig& cfg, std::uint64_t seed) {
  std::vector<Scenario> out;
  for (int w = 0; w < cfg.num_training_scenarios; ++w)
    out.push_back(generate_scenario(cfg, derive_seed(seed, {static_cast<std::uint64_t>(w)})));
  return out;
}

}  // namespace

TEST_SUITE("cache") {

TEST_CASE("popularity-greedy placement is a prefix fill") {
  SystemConfig cfg = reduced_config();  // 4 files, capacity = 2 files
  CacheMatrix cm = preference_caching(cfg);
  REQUIRE(cm.c.rows() == 4);
  for (int m = 0; m < cfg.num_bs; ++m) {
    CHECK(cm.c(0, m) == 1.0);
    CHECK(cm.c(1, m) == 1.0);
    CHECK(cm.c(2, m) == 0.0);
    CHECK(cm.c(3, m) == 0.0);
  }
  cm.validate(cfg);

  cfg.cache_capacity_bits = 0.3 * cfg.library_bits();  // 1.2 files
  cm = preference_caching(cfg);
  for (int m = 0; m < cfg.num_bs; ++m) {
    CHECK(cm.c(0, m) == 1.0);
    CHECK(cm.c(1, m) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(cm.c(2, m) == 0.0);
  }
  cm.validate(cfg);

  cfg.cache_capacity_bits = 0.0;
  CHECK(preference_caching(cfg).c.cwiseAbs().maxCoeff() == 0.0);
  cfg.cache_capacity_bits = 2.0 * cfg.library_bits();
  CHECK(preference_caching(cfg).c.minCoeff() == 1.0);
}

TEST_CASE("uniform placement spreads the capacity evenly") {
  SystemConfig cfg = default_config();  // 10 files of 500 MB
  cfg.cache_capacity_bits = 8.0e9;      // 1000 MB
  const CacheMatrix cm = uniform_caching(cfg);
  CHECK(cm.c.minCoeff() == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(cm.c.maxCoeff() == doctest::Approx(0.2).epsilon(1e-12));
  cm.validate(cfg);

  cfg.cache_capacity_bits = 0.0;
  CHECK(uniform_caching(cfg).c.cwiseAbs().maxCoeff() == 0.0);
  cfg.cache_capacity_bits = 3.0 * cfg.library_bits();
  CHECK(uniform_caching(cfg).c.minCoeff() == 1.0);
}

TEST_CASE("cache validation rejects malformed placements") {
  const SystemConfig cfg = reduced_config();
  CacheMatrix bad;
  bad.c = Eigen::MatrixXd::Constant(cfg.num_files, cfg.num_bs, 1.5);
  CHECK_THROWS_AS(bad.validate(cfg), std::invalid_argument);
  bad.c = Eigen::MatrixXd::Zero(cfg.num_files + 1, cfg.num_bs);
  CHECK_THROWS_AS(bad.validate(cfg), std::invalid_argument);
  SystemConfig tiny = cfg;
  tiny.cache_capacity_bits = 0.0;
  bad.c = Eigen::MatrixXd::Ones(cfg.num_files, cfg.num_bs);
  CHECK_THROWS_WITH_AS(bad.validate(tiny), doctest::Contains("capacity"),
                       std::invalid_argument);
}

TEST_CASE("cache tables round-trip and reject foreign configs") {
  const SystemConfig cfg = reduced_config();
  const CacheMatrix cm = preference_caching(cfg);
  const std::string hash = config_hash(cfg);
  const std::string text = cm.serialize(hash);
  const CacheMatrix back = CacheMatrix::parse(text, hash);
  CHECK(back.c == cm.c);
  CHECK_THROWS(CacheMatrix::parse(text, "0123456789abcdef"));

  const std::string path = "/tmp/cachebeam_test_cache.txt";
  {
    std::ofstream out(path);
    out << text;
  }
  CHECK(CacheMatrix::parse_file(path, hash).c == cm.c);
  std::remove(path.c_str());
}

TEST_CASE("training: determinism, ranges, and snapping") {
  const SystemConfig cfg = micro_config(3);
  const std::vector<Scenario> scen = draws(cfg, 1001);
  const TrainResult a = train_cache(cfg, scen, true);
  const TrainResult b = train_cache(cfg, scen, true);
  CHECK(a.cache.c == b.cache.c);
  CHECK(a.objective == b.objective);
  CHECK(a.objective > 0.0);
  CHECK(a.binariness >= 0.0);
  CHECK(a.binariness <= 1.0);
  CHECK(a.cache.c.minCoeff() >= 0.0);
  CHECK(a.cache.c.maxCoeff() <= 1.0);
  a.cache.validate(cfg);
  // Near-binary entries are snapped to exact {0, 1}.
  for (int f = 0; f < cfg.num_files; ++f)
    for (int m = 0; m < cfg.num_bs; ++m) {
      const double v = a.cache.c(f, m);
      const bool snapped = (v == 0.0) || (v == 1.0);
      const bool interior = (v > 1e-6) && (v < 1.0 - 1e-6);
      CHECK((snapped || interior));
    }
}

TEST_CASE("training with ample capacity matches full-cooperation delivery") {
  SystemConfig cfg = micro_config(2);
  cfg.cache_capacity_bits = cfg.library_bits();
  const std::vector<Scenario> scen = draws(cfg, 2002);
  const TrainResult tr = train_cache(cfg, scen, true);
  // Everything cached, backhaul vacuous: the averaged optimum equals the
  // mean of the per-scenario full-cooperation optima.
  double mean = 0.0;
  for (const Scenario& sc : scen) {
    const ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
    const TransmitSolution ts = solve_fixed_cooperation(
        set, Eigen::MatrixXd::Ones(set.num_lr, set.num_bs), SecrecyMode::Robust);
    REQUIRE(ts.status == TransmitSolution::Status::Feasible);
    mean += ts.sdp_objective / static_cast<double>(scen.size());
  }
  CHECK(tr.objective == doctest::Approx(mean).epsilon(1e-5));
}

TEST_CASE("training objective is non-increasing in cache capacity") {
  SystemConfig cfg = micro_config(3);
  cfg.backhaul_distribution = {{0.0, 0.5}, {1.5e6, 0.5}};  // make caches matter
  const std::vector<Scenario> scen = draws(cfg, 3003);
  double prev = -1.0;
  for (double frac : {0.25, 0.5, 1.0}) {
    SystemConfig c = cfg;
    c.cache_capacity_bits = frac * cfg.library_bits();
    double obj;
    try {
      obj = train_cache(c, scen, true).objective;
    } catch (const TrainingInfeasible&) {
      continue;  // smallest capacity may be infeasible under zero backhaul
    }
    if (prev >= 0.0) CHECK(obj <= prev * (1.0 + 1e-6));
    prev = obj;
  }
  CHECK(prev >= 0.0);
}

TEST_CASE("dropping the secrecy stack never raises the training power") {
  const SystemConfig cfg = micro_config(2);
  const std::vector<Scenario> scen = draws(cfg, 4004);
  const TrainResult secure = train_cache(cfg, scen, true);
  const TrainResult plain = train_cache(cfg, scen, false);
  CHECK(plain.objective <= secure.objective * (1.0 + 1e-6));
}

TEST_CASE("degenerate training inputs are rejected") {
  SystemConfig cfg = micro_config(2);
  CHECK_THROWS_AS(train_cache(cfg, {}, true), std::invalid_argument);
  cfg.cache_capacity_bits = 0.0;
  cfg.backhaul_distribution = {{0.0, 1.0}};
  const std::vector<Scenario> scen = draws(cfg, 5005);
  CHECK_THROWS_AS(train_cache(cfg, scen, true), TrainingInfeasible);
}

}  // TEST_SUITE
