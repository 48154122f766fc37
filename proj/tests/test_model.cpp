#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "cachebeam/config.hpp"
#include "cachebeam/model.hpp"
#include "cachebeam/rng.hpp"
#include "doctest.h"

using namespace cachebeam;

namespace {

bool bit_equal(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (a(i, j) != b(i, j)) return false;
  return true;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("zipf popularity matches the closed form") {
  const Eigen::VectorXd p = zipf_popularity(10, 1.1);
  REQUIRE(p.size() == 10);
  // theta_1 = 1 / sum_{j=1..10} j^-1.1 for F=10, kappa=1.1.
  CHECK(p(0) == doctest::Approx(0.37311272382793187).epsilon(1e-12));
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (int f = 1; f < 10; ++f) {
    CHECK(p(f) < p(f - 1));
    CHECK(p(f) / p(0) ==
          doctest::Approx(std::pow(f + 1, -1.1)).epsilon(1e-12));
  }
}

TEST_CASE("zipf exponent zero is uniform; single file is certain") {
  const Eigen::VectorXd u = zipf_popularity(5, 0.0);
  for (int f = 0; f < 5; ++f) CHECK(u(f) == doctest::Approx(0.2).epsilon(1e-15));
  const Eigen::VectorXd one = zipf_popularity(1, 2.3);
  CHECK(one(0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("zipf is a distribution across the parameter range") {
  for (double kappa : {0.0, 1.5, 3.0}) {
    const Eigen::VectorXd p = zipf_popularity(10000, kappa);
    CHECK(p.minCoeff() > 0.0);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("path loss matches the macro NLOS law") {
  // PL(dB) = 128.1 + 37.6 log10(d_km): 128.1 dB at 1 km.
  CHECK(path_loss_gain(1000.0) ==
        doctest::Approx(std::pow(10.0, -12.81)).epsilon(1e-12));
  auto pl_db = [](double g) { return -10.0 * std::log10(g); };
  CHECK(pl_db(path_loss_gain(500.0)) ==
        doctest::Approx(116.7812721630343).epsilon(1e-12));
  CHECK(pl_db(path_loss_gain(50.0)) ==
        doctest::Approx(79.1812721630343).epsilon(1e-12));
  CHECK_THROWS(path_loss_gain(0.0));
}

TEST_CASE("topology: grid geometry and placement constraints") {
  SystemConfig cfg = default_config();
  RandomStream rng(11);
  const Topology topo = generate_topology(cfg, rng);
  REQUIRE(topo.bs_positions.cols() == cfg.num_bs);
  REQUIRE(topo.lr_positions.cols() == cfg.num_lr);
  CHECK(topo.bs_positions.col(0).norm() == doctest::Approx(0.0));
  for (int m = 1; m < cfg.num_bs; ++m) {
    // Neighbor ring: 500 m from the center BS, at multiples of 60 degrees.
    CHECK(topo.bs_positions.col(m).norm() ==
          doctest::Approx(cfg.inter_bs_distance_m).epsilon(1e-9));
    const double ang =
        std::atan2(topo.bs_positions(1, m), topo.bs_positions(0, m));
    const double sixth = ang / (M_PI / 3.0);
    CHECK(std::abs(sixth - std::round(sixth)) < 1e-9);
  }
  for (int s = 0; s < 20; ++s) {
    RandomStream r2(1000 + s);
    const Topology t = generate_topology(cfg, r2);
    for (int k = 0; k < cfg.num_lr; ++k) {
      CHECK(in_cell_union(t.bs_positions, cfg.inter_bs_distance_m,
                          t.lr_positions.col(k)));
      for (int m = 0; m < cfg.num_bs; ++m)
        CHECK((t.lr_positions.col(k) - t.bs_positions.col(m)).norm() >=
              cfg.min_rx_distance_m);
    }
    for (int m = 0; m < cfg.num_bs; ++m)
      CHECK((t.er_position - t.bs_positions.col(m)).norm() >=
            cfg.min_rx_distance_m);
  }
}

TEST_CASE("topology generation is a pure function of the seed") {
  SystemConfig cfg = default_config();
  RandomStream a(77), b(77);
  const Topology ta = generate_topology(cfg, a);
  const Topology tb = generate_topology(cfg, b);
  CHECK(ta.lr_positions == tb.lr_positions);
  CHECK(ta.er_position == tb.er_position);
}

TEST_CASE("scenario: error split is bit-exact and ball-bounded") {
  SystemConfig cfg = reduced_config();
  const Scenario sc = generate_scenario(cfg, 42);
  REQUIRE(sc.lr_channels.size() == static_cast<std::size_t>(cfg.num_lr));
  for (const auto& h : sc.lr_channels)
    REQUIRE(h.size() == cfg.num_bs * cfg.antennas_per_bs);
  // G = Ghat + DeltaG holds bitwise, and DeltaG stays inside the ball.
  CHECK(bit_equal(sc.er_true, sc.er_est + sc.er_err));
  CHECK(sc.eps > 0.0);
  CHECK(sc.er_err.norm() <= sc.eps * (1.0 + 1e-12));
  for (int k = 0; k < cfg.num_lr; ++k) {
    CHECK(sc.requests[k].lr == k);
    CHECK(sc.requests[k].file >= 0);
    CHECK(sc.requests[k].file < cfg.num_files);
  }
  for (double b : sc.backhaul_bps) {
    bool atom = false;
    for (const auto& a : cfg.backhaul_distribution) atom |= (b == a.rate_bps);
    CHECK(atom);
  }
}

TEST_CASE("scenario generation is deterministic in the seed") {
  SystemConfig cfg = reduced_config();
  const Scenario a = generate_scenario(cfg, 99);
  const Scenario b = generate_scenario(cfg, 99);
  CHECK(bit_equal(a.er_true, b.er_true));
  CHECK(a.backhaul_bps == b.backhaul_bps);
  for (std::size_t k = 0; k < a.lr_channels.size(); ++k)
    CHECK(bit_equal(a.lr_channels[k], b.lr_channels[k]));
  const Scenario c = generate_scenario(cfg, 100);
  CHECK_FALSE(bit_equal(a.er_true, c.er_true));
}

TEST_CASE("requested files and stream lists are consistent") {
  SystemConfig cfg = reduced_config();
  const Scenario sc = generate_scenario(cfg, 5);
  const std::vector<int> files = requested_files(sc);
  CHECK(std::is_sorted(files.begin(), files.end()));
  CHECK(std::adjacent_find(files.begin(), files.end()) == files.end());
  const auto streams = streams_per_file(sc);
  REQUIRE(streams.size() == files.size());
  int total = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    for (int rho : streams[i]) CHECK(sc.requests[rho].file == files[i]);
    total += static_cast<int>(streams[i].size());
  }
  CHECK(total == cfg.num_lr);
}

TEST_CASE("empirical request frequencies follow the popularity") {
  SystemConfig cfg = default_config();
  const Eigen::VectorXd p = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  RandomStream rng(123);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(cfg.num_files);
  const int n = 200000;
  for (int i = 0; i < n; ++i) counts(sample_file(p, rng)) += 1.0;
  counts /= static_cast<double>(n);
  for (int f = 0; f < cfg.num_files; ++f)
    CHECK(std::abs(counts(f) - p(f)) < 0.01);
}

TEST_CASE("empirical backhaul frequencies follow the distribution") {
  SystemConfig cfg = default_config();
  RandomStream rng(321);
  const int n = 100000;
  std::vector<double> freq(cfg.backhaul_distribution.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    const double b = sample_backhaul(cfg, rng);
    bool found = false;
    for (std::size_t j = 0; j < freq.size(); ++j) {
      if (b == cfg.backhaul_distribution[j].rate_bps) {
        freq[j] += 1.0 / n;
        found = true;
        break;
      }
    }
    REQUIRE(found);
  }
  for (std::size_t j = 0; j < freq.size(); ++j)
    CHECK(std::abs(freq[j] - cfg.backhaul_distribution[j].prob) < 0.01);
}

TEST_CASE("scenario fixture round-trips bit-exactly and rejects stale configs") {
  SystemConfig cfg = reduced_config();
  const Scenario sc = generate_scenario(cfg, 7);
  const std::string text = serialize_scenario(cfg, sc);
  const Scenario back = parse_scenario(cfg, text);
  CHECK(bit_equal(sc.er_true, back.er_true));
  CHECK(bit_equal(sc.er_est, back.er_est));
  CHECK(bit_equal(sc.er_err, back.er_err));
  CHECK(sc.eps == back.eps);
  CHECK(sc.backhaul_bps == back.backhaul_bps);
  CHECK(sc.topology.lr_positions == back.topology.lr_positions);
  for (std::size_t k = 0; k < sc.lr_channels.size(); ++k)
    CHECK(bit_equal(sc.lr_channels[k], back.lr_channels[k]));
  for (int k = 0; k < cfg.num_lr; ++k)
    CHECK(sc.requests[k].file == back.requests[k].file);

  SystemConfig other = cfg;
  other.zipf_exponent = 0.9;
  CHECK_THROWS(parse_scenario(other, text));
}

}  // TEST_SUITE
