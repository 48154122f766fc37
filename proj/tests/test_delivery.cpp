#include <cmath>
#include <complex>
#include <vector>

#include "cachebeam/caching.hpp"
#include "cachebeam/constraints.hpp"
#include "cachebeam/delivery.hpp"
#include "cachebeam/model.hpp"
#include "doctest.h"

using namespace cachebeam;

namespace {

CacheMatrix constant_cache(int files, int bs, double value) {
  CacheMatrix c;
  c.c = Eigen::MatrixXd::Constant(files, bs, value);
  return c;
}

}  // namespace

TEST_SUITE("delivery") {

TEST_CASE("effective backhaul rate") {
  const SystemConfig cfg = default_config();
  const double qf = cfg.subfile_rate_bps();
  // 500 MB split into 270000 subfiles of 10 ms each: about 1.48 Mb/s.
  CHECK(qf == doctest::Approx(1481481.4814814816).epsilon(1e-12));
  CHECK(effective_backhaul_rate(1.0, qf) == 0.0);
  CHECK(effective_backhaul_rate(0.0, qf) == qf);
  CHECK(effective_backhaul_rate(0.5, qf) ==
        doctest::Approx(740740.7407407408).epsilon(1e-12));
  CHECK_THROWS(effective_backhaul_rate(1.5, qf));
}

TEST_CASE("violation set arithmetic") {
  const std::vector<int> files = {0, 1, 2};
  const CacheMatrix empty = constant_cache(3, 2, 0.0);
  const CacheMatrix full = constant_cache(3, 2, 1.0);
  Eigen::VectorXd backhaul(2);
  backhaul << 3.0e6, 6.0e6;
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(3, 2);
  // Three uncached 1.5 Mb/s files: 4.5 Mb/s load exceeds 3, fits 6.
  CHECK(violation_set(ones, files, empty, 1.5e6, backhaul) ==
        std::vector<int>{0});
  CHECK(violation_set(Eigen::MatrixXd::Zero(3, 2), files, empty, 1.5e6,
                      backhaul)
            .empty());
  CHECK(violation_set(ones, files, full, 1.5e6, backhaul).empty());
  // Exactly-at-capacity loads are tolerated (relative slack).
  Eigen::VectorXd tight(2);
  tight << 4.5e6, 4.5e6;
  CHECK(violation_set(ones, files, empty, 1.5e6, tight).empty());
}

TEST_CASE("beamformer extraction") {
  SUBCASE("exact rank-1 input returns the generating vector up to phase") {
    Eigen::VectorXcd w(3);
    w << std::complex<double>(2.0, 0.0), 0.0, 0.0;
    const ExtractResult ex = extract_beamformer(w * w.adjoint());
    CHECK(ex.clean);
    CHECK(ex.rank_ratio <= 1e-12);
    CHECK((ex.w * ex.w.adjoint() - w * w.adjoint()).norm() < 1e-9);
    CHECK(std::abs(ex.w.norm() - 2.0) < 1e-12);
  }
  SUBCASE("balanced rank-2 input is flagged") {
    const ExtractResult ex = extract_beamformer(Eigen::MatrixXcd::Identity(2, 2));
    CHECK_FALSE(ex.clean);
    CHECK(ex.rank_ratio == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("zero matrix extracts to a silent beam") {
    const ExtractResult ex = extract_beamformer(Eigen::MatrixXcd::Zero(4, 4));
    CHECK(ex.clean);
    CHECK(ex.w.norm() == 0.0);
  }
}

TEST_CASE("slack margin of the zero design point is analytic") {
  const SystemConfig cfg = reduced_config();
  const ConstraintSet set =
      ConstraintSet::from_scenario(cfg, generate_scenario(cfg, 21));
  const int n = set.n;
  const auto [margin, delta] = secrecy_slack_margin(
      set, Eigen::MatrixXcd::Zero(n, n), Eigen::MatrixXcd::Zero(n, n));
  // In the scaled coordinates the margin is measured in, the zero design
  // gives lambda_min(delta) = min(kappa - delta, delta), so the best margin
  // is kappa/2 at delta = kappa/2.
  CHECK(margin == doctest::Approx(0.5 * set.secrecy_kappa).epsilon(1e-6));
  CHECK(delta == doctest::Approx(0.5 * set.secrecy_kappa).epsilon(1e-4));
}

TEST_CASE("fixed-cooperation solve: bookkeeping and extraction quality") {
  const SystemConfig cfg = reduced_config();
  const Scenario sc = generate_scenario(cfg, 10);
  const ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(set.num_lr, set.num_bs);
  const TransmitSolution ts =
      solve_fixed_cooperation(set, ones, SecrecyMode::Robust);
  REQUIRE(ts.status == TransmitSolution::Status::Feasible);
  CHECK(ts.rank_ratios.maxCoeff() <= 1e-4);
  double trace_sum = ts.V.trace().real();
  for (const auto& w : ts.W) trace_sum += w.trace().real();
  CHECK(ts.sdp_objective == doctest::Approx(trace_sum).epsilon(1e-12));
  CHECK(ts.total_power <= ts.sdp_objective * (1.0 + 1e-9));
  CHECK(ts.total_power >= ts.sdp_objective * (1.0 - 1e-3));
  CHECK(ts.per_bs_power.size() == set.num_bs);
  CHECK(ts.per_bs_power.maxCoeff() <= cfg.max_tx_power_w * (1.0 + 1e-6));
  CHECK(ts.per_bs_power.sum() == doctest::Approx(ts.total_power).epsilon(1e-9));
}

TEST_CASE("shrinking the cooperation set never lowers the power") {
  const SystemConfig cfg = reduced_config();
  const ConstraintSet set =
      ConstraintSet::from_scenario(cfg, generate_scenario(cfg, 18));
  const Eigen::MatrixXd sup = Eigen::MatrixXd::Ones(set.num_lr, set.num_bs);
  Eigen::MatrixXd sub = sup;
  sub(0, 2) = 0.0;
  const TransmitSolution full = solve_fixed_cooperation(set, sup, SecrecyMode::Robust);
  const TransmitSolution part = solve_fixed_cooperation(set, sub, SecrecyMode::Robust);
  REQUIRE(full.status == TransmitSolution::Status::Feasible);
  REQUIRE(part.status == TransmitSolution::Status::Feasible);
  CHECK(part.sdp_objective >= full.sdp_objective * (1.0 - 1e-6));
}

TEST_CASE("greedy with ample backhaul keeps full cooperation") {
  SystemConfig cfg = reduced_config();
  cfg.backhaul_distribution = {{1.0e9, 1.0}};
  const Scenario sc = generate_scenario(cfg, 41);
  const CacheMatrix cache = uniform_caching(cfg);
  const auto [dec, ts] =
      greedy_delivery(cfg, sc, cache, SecrecyMode::Robust);
  REQUIRE(ts.status == TransmitSolution::Status::Feasible);
  CHECK(dec.removal_log.empty());
  CHECK(dec.q.minCoeff() == 1.0);
  // Identical problem, identical deterministic pipeline.
  const ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  const TransmitSolution direct = solve_fixed_cooperation(
      set, Eigen::MatrixXd::Ones(set.num_lr, set.num_bs), SecrecyMode::Robust);
  CHECK(ts.sdp_objective == direct.sdp_objective);
  CHECK(ts.total_power == direct.total_power);
}

TEST_CASE("no backhaul and no cache means nobody can serve") {
  SystemConfig cfg = reduced_config();
  cfg.backhaul_distribution = {{0.0, 1.0}};
  const Scenario sc = generate_scenario(cfg, 19);
  const auto [dec, ts] = greedy_delivery(
      cfg, sc, constant_cache(cfg.num_files, cfg.num_bs, 0.0),
      SecrecyMode::Robust);
  CHECK(ts.status == TransmitSolution::Status::Infeasible);
  CHECK(dec.q.maxCoeff() == 0.0);
}

TEST_CASE("no backhaul but full caches keeps full cooperation") {
  SystemConfig cfg = reduced_config();
  cfg.backhaul_distribution = {{0.0, 1.0}};
  cfg.cache_capacity_bits = cfg.library_bits();
  const Scenario sc = generate_scenario(cfg, 20);
  const CacheMatrix cache = preference_caching(cfg);  // all ones at this size
  REQUIRE(cache.c.minCoeff() == 1.0);
  const auto [dec, ts] = greedy_delivery(cfg, sc, cache, SecrecyMode::Robust);
  REQUIRE(ts.status == TransmitSolution::Status::Feasible);
  CHECK(dec.removal_log.empty());
  CHECK(dec.q.minCoeff() == 1.0);
  CHECK(dec.b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("greedy matches or trails the exhaustive search under tight backhaul") {
  SystemConfig cfg = reduced_config();
  cfg.backhaul_distribution = {{1.5e6, 0.6}, {4.5e6, 0.4}};
  cfg.cache_capacity_bits = 0.3 * cfg.library_bits();
  const CacheMatrix cache = uniform_caching(cfg);
  int both_feasible = 0;
  for (std::uint64_t seed : {51ull, 52ull, 53ull}) {
    const Scenario sc = generate_scenario(cfg, seed);
    const auto [gd, gts] = greedy_delivery(cfg, sc, cache, SecrecyMode::Robust);
    const auto [ed, ets] =
        exhaustive_delivery(cfg, sc, cache, SecrecyMode::Robust);
    // A feasible greedy decision proves the instance feasible.
    if (gts.status == TransmitSolution::Status::Feasible)
      CHECK(ets.status == TransmitSolution::Status::Feasible);
    if (gts.status != TransmitSolution::Status::Feasible ||
        ets.status != TransmitSolution::Status::Feasible)
      continue;
    ++both_feasible;
    CHECK(gts.sdp_objective >= ets.sdp_objective * (1.0 - 1e-6));
    CHECK(violation_set(gd.q, gd.files, cache, cfg.subfile_rate_bps(),
                        sc.backhaul_bps)
              .empty());
    CHECK(violation_set(ed.q, ed.files, cache, cfg.subfile_rate_bps(),
                        sc.backhaul_bps)
              .empty());
    CHECK(static_cast<int>(gd.removal_log.size()) <=
          static_cast<int>(gd.files.size()) * cfg.num_bs);
    CHECK(gd.candidate_solves >= static_cast<int>(gd.removal_log.size()));
  }
  CHECK(both_feasible >= 1);
}

TEST_CASE("exhaustive search refuses oversized instances") {
  SystemConfig cfg = reduced_config();
  cfg.backhaul_distribution = {{1.5e6, 1.0}};
  const Scenario sc = generate_scenario(cfg, 61);
  const CacheMatrix cache = uniform_caching(cfg);
  CHECK_THROWS_WITH_AS(
      exhaustive_delivery(cfg, sc, cache, SecrecyMode::Robust, {}, 1),
      doctest::Contains("exceed"), std::invalid_argument);
}

TEST_CASE("per-file flags expand to identical rows for shared requests") {
  const SystemConfig cfg = reduced_config();
  Scenario sc = generate_scenario(cfg, 63);
  sc.requests[1].file = sc.requests[0].file;  // both streams want one file
  const ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  CooperationDecision dec;
  dec.files = requested_files(sc);
  REQUIRE(dec.files.size() == 1);
  dec.q = Eigen::MatrixXd::Ones(1, cfg.num_bs);
  dec.q(0, 1) = 0.0;
  const Eigen::MatrixXd flags = dec.stream_flags(set);
  REQUIRE(flags.rows() == 2);
  CHECK(flags.row(0) == flags.row(1));
  CHECK(flags(0, 1) == 0.0);

  const CacheMatrix cache = constant_cache(cfg.num_files, cfg.num_bs, 0.25);
  dec.finalize(cache);
  for (int m = 0; m < cfg.num_bs; ++m)
    CHECK(dec.b(0, m) ==
          doctest::Approx((1.0 - 0.25) * dec.q(0, m)).epsilon(1e-15));
  REQUIRE(dec.coop_sets.size() == 1);
  CHECK(static_cast<int>(dec.coop_sets[0].size()) == cfg.num_bs - 1);
}

}  // TEST_SUITE
