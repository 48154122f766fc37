#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cachebeam/evaluate.hpp"
#include "cachebeam/model.hpp"
#include "cachebeam/rng.hpp"
#include "doctest.h"

using namespace cachebeam;

namespace {

Eigen::VectorXcd random_cvec(int n, RandomStream& rng) {
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.cnormal();
  return v;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool file_exists(const std::string& path) {
  std::ifstream in(path);
  return in.good();
}

}  // namespace

TEST_SUITE("evaluate") {

TEST_CASE("LR SINR and rate") {
  RandomStream rng(17);
  const int n = 4;
  const Eigen::VectorXcd h = random_cvec(n, rng);
  const Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(n, n);
  SUBCASE("matched filter at unit noise") {
    const double p = 0.7;
    std::vector<Eigen::MatrixXcd> w = {p * h * h.adjoint() / h.squaredNorm()};
    CHECK(lr_sinr(h, w, 0, zero) ==
          doctest::Approx(p * h.squaredNorm()).epsilon(1e-9));
    CHECK(lr_rate(h, w, 0, zero) ==
          doctest::Approx(std::log2(1.0 + p * h.squaredNorm())).epsilon(1e-9));
  }
  SUBCASE("null channel carries nothing") {
    std::vector<Eigen::MatrixXcd> w = {Eigen::MatrixXcd::Identity(n, n)};
    CHECK(lr_rate(Eigen::VectorXcd::Zero(n), w, 0, zero) == 0.0);
  }
  SUBCASE("matrix form matches the vector form with interference and noise") {
    const Eigen::VectorXcd w0 = random_cvec(n, rng);
    const Eigen::VectorXcd w1 = random_cvec(n, rng);
    const Eigen::VectorXcd vv = random_cvec(n, rng);
    std::vector<Eigen::MatrixXcd> w = {w0 * w0.adjoint(), w1 * w1.adjoint()};
    const Eigen::MatrixXcd v = 0.3 * vv * vv.adjoint();
    const double signal = std::norm((h.adjoint() * w0)(0));
    const double interf = std::norm((h.adjoint() * w1)(0)) +
                          0.3 * std::norm((h.adjoint() * vv)(0));
    CHECK(lr_sinr(h, w, 0, v) ==
          doctest::Approx(signal / (1.0 + interf)).epsilon(1e-9));
  }
}

TEST_CASE("eavesdropper capacity") {
  RandomStream rng(19);
  const int n = 4, ne = 2;
  Eigen::MatrixXcd g(n, ne);
  for (int j = 0; j < ne; ++j) g.col(j) = random_cvec(n, rng);
  const Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(n, n);
  SUBCASE("null channel learns nothing") {
    CHECK(er_capacity(Eigen::MatrixXcd::Zero(n, ne),
                      Eigen::MatrixXcd::Identity(n, n), zero) == 0.0);
  }
  SUBCASE("rank-1 beam against a silent jammer") {
    const Eigen::VectorXcd w = random_cvec(n, rng);
    const double expected = std::log2(1.0 + (g.adjoint() * w).squaredNorm());
    CHECK(er_capacity(g, w * w.adjoint(), zero) ==
          doctest::Approx(expected).epsilon(1e-9));
  }
  SUBCASE("strong artificial noise floods the eavesdropper") {
    const Eigen::VectorXcd w = random_cvec(n, rng);
    const Eigen::MatrixXcd v = 1.0e9 * Eigen::MatrixXcd::Identity(n, n);
    CHECK(er_capacity(g, w * w.adjoint(), v) < 1e-6);
  }
}

TEST_CASE("sampled worst-case eavesdropper rate") {
  RandomStream rng(23);
  const int n = 4, ne = 2;
  Eigen::MatrixXcd g(n, ne);
  for (int j = 0; j < ne; ++j) g.col(j) = 0.5 * random_cvec(n, rng);
  const Eigen::VectorXcd wv = random_cvec(n, rng);
  const Eigen::MatrixXcd w = wv * wv.adjoint();
  const Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(n, n);
  const double center = er_capacity(g, w, v);
  // Zero radius degenerates to the center evaluation.
  CHECK(worst_case_er_rate(g, 0.0, w, v, 50, 7) ==
        doctest::Approx(center).epsilon(1e-12));
  const double wc1 = worst_case_er_rate(g, 0.05, w, v, 200, 7);
  const double wc2 = worst_case_er_rate(g, 0.10, w, v, 200, 7);
  CHECK(wc1 >= center - 1e-12);
  CHECK(wc2 >= wc1 - 1e-9);  // larger ball, larger worst case
  const double plain = worst_case_er_rate(g, 0.05, w, v, 200, 7, false);
  CHECK(wc1 >= plain - 1e-12);  // refinement only improves the bound
}

TEST_CASE("dBm conversion") {
  CHECK(watts_to_dbm(1.0) == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(watts_to_dbm(63.09573444801933) == doctest::Approx(48.0).epsilon(1e-12));
  CHECK(std::isnan(watts_to_dbm(std::numeric_limits<double>::quiet_NaN())));
}

TEST_CASE("scheme names and codes") {
  CHECK(scheme_label(CachingScheme::Optimized, DeliveryScheme::Greedy) ==
        "optimized+greedy");
  CHECK(scheme_label(CachingScheme::Preference, DeliveryScheme::Coordinated) ==
        "preference+coordinated");
  CHECK(scheme_label(CachingScheme::Uniform, DeliveryScheme::FullCooperation) ==
        "uniform+fullcoop");
  CHECK(scheme_label(CachingScheme::NoSecurity, DeliveryScheme::NonRobust) ==
        "nosec+nonrobust");
  std::set<int> codes;
  for (CachingScheme c : {CachingScheme::Optimized, CachingScheme::NoSecurity,
                          CachingScheme::Preference, CachingScheme::Uniform})
    for (DeliveryScheme d :
         {DeliveryScheme::Greedy, DeliveryScheme::Coordinated,
          DeliveryScheme::FullCooperation, DeliveryScheme::NonRobust})
      codes.insert(scheme_code(c, d));
  CHECK(codes.size() == 16);  // distinct trial-seed derivations per scheme
}

TEST_CASE("nearest-BS assignment honors distance and residual backhaul") {
  const SystemConfig cfg = reduced_config();
  Scenario sc = generate_scenario(cfg, 71);
  CacheMatrix none;
  none.c = Eigen::MatrixXd::Zero(cfg.num_files, cfg.num_bs);

  // Rank BSs by distance for stream 0.
  std::vector<std::pair<double, int>> order;
  for (int m = 0; m < cfg.num_bs; ++m)
    order.push_back({(sc.topology.lr_positions.col(0) -
                      sc.topology.bs_positions.col(m))
                         .norm(),
                     m});
  std::sort(order.begin(), order.end());

  SUBCASE("ample backhaul everywhere: nearest BS wins") {
    sc.backhaul_bps = Eigen::VectorXd::Constant(cfg.num_bs, 1.0e9);
    const Eigen::MatrixXd flags = nearest_bs_assignment(cfg, sc, none);
    REQUIRE(flags.size() > 0);
    for (int k = 0; k < cfg.num_lr; ++k)
      CHECK(flags.row(k).sum() == doctest::Approx(1.0));
    CHECK(flags(0, order[0].second) == 1.0);
  }
  SUBCASE("starved nearest BS: the runner-up serves") {
    sc.backhaul_bps = Eigen::VectorXd::Constant(cfg.num_bs, 1.0e9);
    sc.backhaul_bps(order[0].second) = 0.0;
    const Eigen::MatrixXd flags = nearest_bs_assignment(cfg, sc, none);
    REQUIRE(flags.size() > 0);
    CHECK(flags(0, order[0].second) == 0.0);
    CHECK(flags(0, order[1].second) == 1.0);
  }
  SUBCASE("fully cached content needs no backhaul at all") {
    sc.backhaul_bps = Eigen::VectorXd::Zero(cfg.num_bs);
    CacheMatrix full;
    full.c = Eigen::MatrixXd::Ones(cfg.num_files, cfg.num_bs);
    const Eigen::MatrixXd flags = nearest_bs_assignment(cfg, sc, full);
    REQUIRE(flags.size() > 0);
    CHECK(flags(0, order[0].second) == 1.0);
  }
  SUBCASE("nobody can serve: empty result") {
    sc.backhaul_bps = Eigen::VectorXd::Zero(cfg.num_bs);
    CHECK(nearest_bs_assignment(cfg, sc, none).size() == 0);
  }
}

TEST_CASE("delivery trials: determinism and outage bookkeeping") {
  const SystemConfig cfg = reduced_config();
  const CacheMatrix cache = preference_caching(cfg);
  const TrialResult a = run_delivery_trial(cfg, cache, DeliveryScheme::Greedy, 911);
  const TrialResult b = run_delivery_trial(cfg, cache, DeliveryScheme::Greedy, 911);
  CHECK(a.feasible == b.feasible);
  CHECK(a.outage == b.outage);
  if (std::isnan(a.total_power_w))
    CHECK(std::isnan(b.total_power_w));
  else
    CHECK(a.total_power_w == b.total_power_w);
  CHECK(a.message == b.message);
  CHECK(a.scheme == "greedy");
}

TEST_CASE("a feasible trial passes its own audit") {
  const SystemConfig cfg = reduced_config();
  const CacheMatrix cache = preference_caching(cfg);
  bool found = false;
  for (std::uint64_t seed = 1; seed <= 12 && !found; ++seed) {
    const TrialResult tr =
        run_delivery_trial(cfg, cache, DeliveryScheme::Greedy, seed);
    if (!tr.feasible) continue;
    found = true;
    CHECK(tr.audit_ok);
    CHECK_FALSE(tr.outage);
    CHECK(tr.total_power_w > 0.0);
    CHECK(tr.per_bs_power.maxCoeff() <= cfg.max_tx_power_w * (1.0 + 1e-6));
    CHECK(tr.min_secrecy_rate >= 0.0);  // reported as [R - R_e]^+
    CHECK(tr.lr_rates.size() == cfg.num_lr);
    CHECK(tr.lr_rates.minCoeff() >= cfg.qos_rate_bpshz() * (1.0 - 1e-6));
    CHECK(tr.worst_case_er.size() == cfg.num_lr);
    CHECK(tr.worst_case_er.maxCoeff() <= cfg.tol_rate_bpshz() + 1e-6);
    CHECK(tr.avg_coop_bs >= 1.0);
    CHECK(tr.avg_coop_bs <= cfg.num_bs);
    CHECK(tr.max_rank_ratio <= 1e-4);
  }
  CHECK(found);
}

TEST_CASE("forced outage marks the trial infeasible") {
  SystemConfig cfg = reduced_config();
  cfg.backhaul_distribution = {{0.0, 1.0}};
  CacheMatrix none;
  none.c = Eigen::MatrixXd::Zero(cfg.num_files, cfg.num_bs);
  for (DeliveryScheme scheme :
       {DeliveryScheme::Greedy, DeliveryScheme::Coordinated,
        DeliveryScheme::FullCooperation}) {
    const TrialResult tr = run_delivery_trial(cfg, none, scheme, 5150);
    CHECK_FALSE(tr.feasible);
    CHECK(tr.outage);  // infeasibility counts as a secrecy outage
    CHECK(std::isnan(tr.total_power_w));
  }
}

TEST_CASE("scheme power ordering on a commonly feasible draw") {
  const SystemConfig cfg = reduced_config();
  const CacheMatrix cache = preference_caching(cfg);
  int common = 0;
  for (std::uint64_t seed = 100; seed < 130 && common < 3; ++seed) {
    const Scenario sc = generate_scenario(cfg, seed);
    const TrialResult full = evaluate_delivery(
        cfg, sc, cache, DeliveryScheme::FullCooperation, seed);
    const TrialResult greedy =
        evaluate_delivery(cfg, sc, cache, DeliveryScheme::Greedy, seed);
    const TrialResult coord =
        evaluate_delivery(cfg, sc, cache, DeliveryScheme::Coordinated, seed);
    if (!(full.feasible && greedy.feasible && coord.feasible)) continue;
    ++common;
    // Larger cooperation sets can only help (relaxed objective comparison).
    CHECK(full.sdp_objective_w <= greedy.sdp_objective_w * (1.0 + 1e-6) + 1e-9);
    CHECK(greedy.sdp_objective_w <= coord.sdp_objective_w * (1.0 + 1e-6) + 1e-9);
  }
  CHECK(common >= 1);
}

TEST_CASE("outage probability arithmetic") {
  TrialResult ok;
  ok.outage = false;
  TrialResult bad;
  bad.outage = true;
  CHECK(secrecy_outage_probability({ok, ok, ok}) == 0.0);
  CHECK(secrecy_outage_probability({bad, bad}) == 1.0);
  CHECK(secrecy_outage_probability({ok, bad, ok}) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(secrecy_outage_probability({}), std::invalid_argument);
}

TEST_CASE("training scenario sets are sized and seeded deterministically") {
  SystemConfig cfg = reduced_config();
  cfg.num_training_scenarios = 4;
  const auto a = training_scenarios(cfg, 1234, 0);
  const auto b = training_scenarios(cfg, 1234, 0);
  const auto c = training_scenarios(cfg, 1234, 1);
  REQUIRE(a.size() == 4);
  CHECK(a[0].er_true == b[0].er_true);
  CHECK_FALSE(a[0].er_true == c[0].er_true);   // per-point independence
  CHECK_FALSE(a[0].er_true == a[1].er_true);   // per-draw independence
}

TEST_CASE("CSV rendering matches the published schema byte for byte") {
  SweepRow r1;
  r1.swept_value = 30.0;
  r1.scheme = "preference+greedy";
  r1.n_trials = 3;
  r1.n_feasible = 2;
  r1.avg_power_w = 2.0;
  r1.avg_power_dbm = watts_to_dbm(2.0);
  r1.p_out = 1.0 / 3.0;
  r1.avg_coop_bs = 2.5;
  r1.master_seed = 42;
  SweepRow r2;
  r2.swept_value = 70.0;
  r2.scheme = "optimized+greedy";
  r2.n_trials = 3;
  r2.n_feasible = 0;
  r2.master_seed = 42;
  r2.trained = false;  // cache training failed: power and p_out are undefined
  const std::string expected =
      "capacity_pct,scheme,n_trials,n_feasible,avg_power_dBm,p_out,avg_coop_bs,"
      "master_seed\n"
      "30.000000,preference+greedy,3,2,33.010300,0.333333,2.500000,42\n"
      "70.000000,optimized+greedy,3,0,nan,nan,nan,42\n";
  CHECK(csv_text({r1, r2}) == expected);
}

TEST_CASE("CSV writes are atomic") {
  SweepRow r;
  r.swept_value = 10.0;
  r.scheme = "uniform+greedy";
  r.n_trials = 1;
  r.n_feasible = 1;
  r.avg_power_dbm = 31.0;
  r.p_out = 0.0;
  r.avg_coop_bs = 3.0;
  r.master_seed = 7;
  const std::string path = "/tmp/cachebeam_test_sweep.csv";
  write_csv({r}, path);
  CHECK(slurp(path) == csv_text({r}));
  CHECK_FALSE(file_exists(path + ".tmp"));
  std::remove(path.c_str());
  // Unwritable target: no file, no leftover temp.
  CHECK_THROWS(write_csv({r}, "/tmp/no_such_dir_cachebeam/out.csv"));
  CHECK_FALSE(file_exists("/tmp/no_such_dir_cachebeam/out.csv.tmp"));
}

TEST_CASE("sweep points aggregate trials and notify the sink") {
  const SystemConfig cfg = reduced_config();
  const CacheMatrix cache = preference_caching(cfg);
  std::vector<std::pair<int, int>> seen;
  const TrialSink sink = [&](int point, int trial, const TrialResult&) {
    seen.push_back({point, trial});
  };
  const SweepRow row = evaluate_sweep_point(cfg, cache, DeliveryScheme::Greedy,
                                            3, 2026, 1, 22, "preference+greedy",
                                            {}, sink);
  CHECK(row.n_trials == 3);
  CHECK(row.scheme == "preference+greedy");
  CHECK(row.master_seed == 2026);
  CHECK(seen == std::vector<std::pair<int, int>>{{1, 0}, {1, 1}, {1, 2}});
  CHECK(row.n_feasible >= 0);
  CHECK(row.n_feasible <= 3);
  CHECK(row.p_out >= 0.0);
  CHECK(row.p_out <= 1.0);
  if (row.n_feasible > 0) {
    CHECK(row.avg_power_dbm ==
          doctest::Approx(watts_to_dbm(row.avg_power_w)).epsilon(1e-12));
  } else {
    CHECK(std::isnan(row.avg_power_w));
  }
}

TEST_CASE("cache-capacity sweep: validation, shape, determinism") {
  const SystemConfig cfg = reduced_config();
  CHECK_THROWS_AS(run_cache_sweep(cfg, CachingScheme::Preference,
                                  DeliveryScheme::Greedy, {}, 2, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_cache_sweep(cfg, CachingScheme::Preference,
                                  DeliveryScheme::Greedy, {70.0, 30.0}, 2, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_cache_sweep(cfg, CachingScheme::Preference,
                                  DeliveryScheme::Greedy, {30.0, 70.0}, 0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_antenna_sweep(cfg, CachingScheme::Preference,
                                    DeliveryScheme::Greedy, {2.5}, 1, 1),
                  std::invalid_argument);

  const std::vector<SweepRow> rows = run_cache_sweep(
      cfg, CachingScheme::Preference, DeliveryScheme::Greedy, {30.0, 70.0}, 2, 99);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].swept_value == 30.0);
  CHECK(rows[1].swept_value == 70.0);
  CHECK(rows[0].scheme == "preference+greedy");
  const std::vector<SweepRow> again = run_cache_sweep(
      cfg, CachingScheme::Preference, DeliveryScheme::Greedy, {30.0, 70.0}, 2, 99);
  CHECK(csv_text(rows) == csv_text(again));
}

}  // TEST_SUITE
