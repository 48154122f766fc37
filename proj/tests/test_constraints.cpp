#include <cmath>
#include <complex>
#include <vector>

#include "cachebeam/constraints.hpp"
#include "cachebeam/delivery.hpp"
#include "cachebeam/evaluate.hpp"
#include "cachebeam/model.hpp"
#include "cachebeam/rng.hpp"
#include "doctest.h"

using namespace cachebeam;

namespace {

double re_tr(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a * b).trace().real();
}

// SINR of stream rho recomputed from covariance matrices (Eq. (8) form).
double matrix_sinr(const ConstraintSet& set, const std::vector<Eigen::MatrixXcd>& w,
                   const Eigen::MatrixXcd& v, int rho) {
  double denom = 1.0 + re_tr(set.channel_outer[rho], v);
  for (int j = 0; j < set.num_lr; ++j)
    if (j != rho) denom += re_tr(set.channel_outer[rho], w[j]);
  return re_tr(set.channel_outer[rho], w[rho]) / denom;
}

Eigen::VectorXcd random_cvec(int n, RandomStream& rng) {
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.cnormal();
  return v;
}

}  // namespace

TEST_SUITE("constraints") {

TEST_CASE("rate thresholds in unit-noise units") {
  const SystemConfig cfg = default_config();
  // 1.65 Mb/s over 10 MHz -> 0.165 bit/s/Hz; 0.15 Mb/s -> 0.015 bit/s/Hz.
  CHECK(cfg.qos_rate_bpshz() == doctest::Approx(0.165).epsilon(1e-12));
  CHECK(cfg.sinr_target() ==
        doctest::Approx(0.12116607802850887).epsilon(1e-12));
  CHECK(cfg.secrecy_kappa_tol() ==
        doctest::Approx(0.010451446486763771).epsilon(1e-12));

  const Scenario sc = generate_scenario(cfg, 1);
  const ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  CHECK(set.n == cfg.num_bs * cfg.antennas_per_bs);
  CHECK(set.sinr_target == doctest::Approx(cfg.sinr_target()).epsilon(1e-15));
  CHECK(set.secrecy_kappa ==
        doctest::Approx(cfg.secrecy_kappa_tol()).epsilon(1e-15));
  CHECK(set.an_weight == doctest::Approx(set.secrecy_kappa).epsilon(1e-15));
  CHECK(set.csi_radius == doctest::Approx(sc.eps).epsilon(1e-15));
  for (int k = 0; k < cfg.num_lr; ++k)
    CHECK(set.stream_files[k] == sc.requests[k].file);
}

TEST_CASE("BS selectors are orthogonal idempotents summing to identity") {
  const SystemConfig cfg = reduced_config();
  const ConstraintSet set =
      ConstraintSet::from_scenario(cfg, generate_scenario(cfg, 2));
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(set.n, set.n);
  for (int m = 0; m < set.num_bs; ++m) {
    const Eigen::MatrixXd& lam = set.bs_selector[m];
    CHECK((lam * lam - lam).cwiseAbs().maxCoeff() == 0.0);
    CHECK(lam.trace() == doctest::Approx(cfg.antennas_per_bs));
    for (int l = 0; l < m; ++l)
      CHECK((lam * set.bs_selector[l]).cwiseAbs().maxCoeff() == 0.0);
    sum += lam;
  }
  CHECK((sum - Eigen::MatrixXd::Identity(set.n, set.n)).cwiseAbs().maxCoeff() ==
        0.0);
  // tr(Lambda_m * (P/(M Nt)) I) = P/M: isotropic noise splits power evenly.
  const double p = cfg.max_tx_power_w;
  const double per_bs =
      (set.bs_selector[0] * (p / set.n) * Eigen::MatrixXd::Identity(set.n, set.n))
          .trace();
  CHECK(per_bs == doctest::Approx(p / cfg.num_bs).epsilon(1e-12));
}

TEST_CASE("channel outer products are rank-1 grams of the channels") {
  const SystemConfig cfg = reduced_config();
  const Scenario sc = generate_scenario(cfg, 3);
  const ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  for (int k = 0; k < cfg.num_lr; ++k) {
    const Eigen::MatrixXcd outer =
        sc.lr_channels[k] * sc.lr_channels[k].adjoint();
    CHECK((set.channel_outer[k] - outer).cwiseAbs().maxCoeff() <
          1e-12 * (1.0 + outer.cwiseAbs().maxCoeff()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(set.channel_outer[k]);
    const Eigen::VectorXd ev = es.eigenvalues();
    CHECK(ev.minCoeff() > -1e-12 * ev.maxCoeff());
    CHECK(ev(ev.size() - 2) <= 1e-9 * ev.maxCoeff());
  }
}

TEST_CASE("robust stack is the estimate stacked with the identity") {
  const SystemConfig cfg = reduced_config();
  const ConstraintSet set =
      ConstraintSet::from_scenario(cfg, generate_scenario(cfg, 4));
  REQUIRE(set.robust_stack.rows() == set.n);
  REQUIRE(set.robust_stack.cols() == set.er_antennas + set.n);
  CHECK((set.robust_stack.leftCols(set.er_antennas) - set.er_estimate)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((set.robust_stack.rightCols(set.n) -
         Eigen::MatrixXcd::Identity(set.n, set.n))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("solved robust program satisfies every constraint in matrix form") {
  const SystemConfig cfg = reduced_config();
  const Scenario sc = generate_scenario(cfg, 8);
  const ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  const Eigen::MatrixXd flags = Eigen::MatrixXd::Ones(set.num_lr, set.num_bs);
  DeliveryLayout layout;
  SdpProblem prob = assemble_delivery(set, flags, SecrecyMode::Robust, layout);
  prob.validate();
  const SdpSolution sol = solve_sdp(prob);
  REQUIRE(sol.status == SdpStatus::Optimal);
  const DeliveryVars vars = unpack_delivery(set, layout, sol);

  double trace_sum = vars.V.trace().real();
  for (const auto& w : vars.W) trace_sum += w.trace().real();
  CHECK(sol.objective ==
        doctest::Approx(trace_sum).epsilon(1e-9));

  for (int rho = 0; rho < set.num_lr; ++rho) {
    CHECK(matrix_sinr(set, vars.W, vars.V, rho) >=
          set.sinr_target * (1.0 - 1e-6));
    CHECK(vars.delta(rho) >= -1e-9);
    CHECK(secrecy_slack_margin(set, vars.W[rho], vars.V).first >= -1e-8);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(vars.W[rho],
                                                       Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() > -1e-7 * (1.0 + sol.objective));
  }
  for (int m = 0; m < set.num_bs; ++m) {
    Eigen::MatrixXcd lam = set.bs_selector[m].cast<std::complex<double>>();
    double p = re_tr(lam, vars.V);
    for (const auto& w : vars.W) p += re_tr(lam, w);
    CHECK(p <= cfg.max_tx_power_w * (1.0 + 1e-6));
  }
}

TEST_CASE("cooperation flags force exact zero blocks") {
  const SystemConfig cfg = reduced_config();
  const Scenario sc = generate_scenario(cfg, 6);
  const ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  Eigen::MatrixXd flags = Eigen::MatrixXd::Ones(set.num_lr, set.num_bs);
  flags(0, 1) = 0.0;
  const TransmitSolution ts =
      solve_fixed_cooperation(set, flags, SecrecyMode::Robust);
  REQUIRE(ts.status == TransmitSolution::Status::Feasible);
  const int nt = set.n / set.num_bs;
  CHECK(ts.W[0].middleRows(nt, nt).norm() <= 1e-7);
  CHECK(ts.W[0].middleCols(nt, nt).norm() <= 1e-7);
  CHECK(ts.w[0].segment(nt, nt).norm() <= 1e-7);
  // The silenced stream still meets its SINR target from the extracted beams.
  std::vector<Eigen::MatrixXcd> wmats(set.num_lr);
  for (int k = 0; k < set.num_lr; ++k) wmats[k] = ts.w[k] * ts.w[k].adjoint();
  CHECK(matrix_sinr(set, wmats, ts.V, 0) >= set.sinr_target * (1.0 - 1e-6));
}

TEST_CASE("fractional flags cap the per-stream block power") {
  const SystemConfig cfg = reduced_config();
  const Scenario sc = generate_scenario(cfg, 10);
  const ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  Eigen::MatrixXd flags = Eigen::MatrixXd::Ones(set.num_lr, set.num_bs);
  flags(0, 0) = 0.5;
  DeliveryLayout layout;
  SdpProblem prob = assemble_delivery(set, flags, SecrecyMode::Robust, layout);
  const SdpSolution sol = solve_sdp(prob);
  REQUIRE(sol.status == SdpStatus::Optimal);
  const DeliveryVars vars = unpack_delivery(set, layout, sol);
  const Eigen::MatrixXcd lam = set.bs_selector[0].cast<std::complex<double>>();
  CHECK(re_tr(lam, vars.W[0]) <= 0.5 * cfg.max_tx_power_w * (1.0 + 1e-6));
}

TEST_CASE("single-user design reduces to matched-filter power") {
  SystemConfig cfg = reduced_config();
  cfg.num_bs = 1;
  cfg.antennas_per_bs = 2;
  cfg.num_lr = 1;
  cfg.er_antennas = 1;
  cfg.validate();
  const Scenario sc = generate_scenario(cfg, 9);
  const ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  // Null eavesdropper channel: the secrecy constraint is vacuous, so the
  // optimum is classic min-power beamforming p* = kappa_req / ||h||^2.
  const Eigen::MatrixXcd null_g = Eigen::MatrixXcd::Zero(set.n, set.er_antennas);
  const TransmitSolution ts = solve_fixed_cooperation(
      set, Eigen::MatrixXd::Ones(1, 1), SecrecyMode::Perfect, {}, &null_g);
  REQUIRE(ts.status == TransmitSolution::Status::Feasible);
  const double expected = set.sinr_target / sc.lr_channels[0].squaredNorm();
  CHECK(ts.sdp_objective == doctest::Approx(expected).epsilon(1e-5));
  CHECK(ts.total_power == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("perfect-CSI secrecy matches the rank-1 rate form") {
  RandomStream rng(77);
  const int n = 4, ne = 2;
  Eigen::MatrixXcd g(n, ne);
  for (int j = 0; j < ne; ++j) g.col(j) = random_cvec(n, rng);
  g *= 0.4;
  const Eigen::VectorXcd w0 = random_cvec(n, rng);
  const double kappa = 0.010451446486763771;
  const double r_tol = std::log2(1.0 + kappa);
  for (double t : {0.25, 0.9, 1.1, 4.0}) {
    const double gain0 = (g.adjoint() * w0).squaredNorm();
    const Eigen::VectorXcd w = w0 * std::sqrt(t * kappa / gain0);
    const Eigen::MatrixXcd wmat = w * w.adjoint();
    // lambda_max(G' W G) = ||G' w||^2 = t*kappa for rank-1 W, so the LMI
    // accepts exactly when the evaluated rate is below the tolerance.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g.adjoint() * wmat * g,
                                                       Eigen::EigenvaluesOnly);
    const bool lmi_ok = es.eigenvalues().maxCoeff() <= kappa * (1.0 + 1e-12);
    const bool rate_ok =
        er_capacity(g, wmat, Eigen::MatrixXcd::Zero(n, n)) <= r_tol * (1.0 + 1e-12);
    CHECK(lmi_ok == (t <= 1.0));
    CHECK(rate_ok == lmi_ok);
  }
}

TEST_CASE("tiny-radius robust constraint agrees with the perfect one") {
  const SystemConfig cfg = reduced_config();
  const Scenario sc = generate_scenario(cfg, 11);
  ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  set.csi_radius = 1e-9;
  RandomStream rng(2211);
  int decisive = 0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXcd w0 = random_cvec(set.n, rng);
    Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(set.n, set.n);
    if (i % 3 == 0) {
      const Eigen::VectorXcd vv = random_cvec(set.n, rng);
      v = 0.05 * vv * vv.adjoint();
    }
    const Eigen::MatrixXcd base = w0 * w0.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e0(
        set.er_estimate.adjoint() * (base - set.an_weight * v) * set.er_estimate,
        Eigen::EigenvaluesOnly);
    const double lam = e0.eigenvalues().maxCoeff();
    if (lam <= 1e-12) continue;
    // Scale across the acceptance boundary.
    const double u = std::exp(rng.uniform(std::log(0.3), std::log(3.0)));
    const Eigen::MatrixXcd w = base * (u * set.secrecy_kappa / lam);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e1(
        set.er_estimate.adjoint() * (w - set.an_weight * v) * set.er_estimate,
        Eigen::EigenvaluesOnly);
    const double perfect_margin =
        set.secrecy_kappa - e1.eigenvalues().maxCoeff();
    if (std::abs(perfect_margin) < 1e-7) continue;  // boundary, undecidable
    ++decisive;
    const bool robust_ok = secrecy_slack_margin(set, w, v).first >= 0.0;
    CHECK(robust_ok == (perfect_margin > 0.0));
  }
  CHECK(decisive >= 80);
}

TEST_CASE("robust design is secure on sampled channel errors") {
  const SystemConfig cfg = reduced_config();
  const Scenario sc = generate_scenario(cfg, 14);
  const ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  const TransmitSolution ts = solve_fixed_cooperation(
      set, Eigen::MatrixXd::Ones(set.num_lr, set.num_bs), SecrecyMode::Robust);
  REQUIRE(ts.status == TransmitSolution::Status::Feasible);
  const double r_tol = cfg.tol_rate_bpshz();
  for (int rho = 0; rho < set.num_lr; ++rho) {
    const Eigen::MatrixXcd wmat = ts.w[rho] * ts.w[rho].adjoint();
    const double wc = worst_case_er_rate(set.er_estimate, set.csi_radius, wmat,
                                         ts.V, 1000, 4242 + rho);
    CHECK(wc <= r_tol + 1e-6);
  }
}

TEST_CASE("degenerate rate targets are rejected by validation") {
  SystemConfig cfg = default_config();
  cfg.qos_rate_bps = 0.0;
  CHECK_THROWS_WITH_AS(cfg.validate(),
                       doctest::Contains("qos_rate_bps"), std::invalid_argument);
  SystemConfig cfg2 = default_config();
  cfg2.secrecy_rate_tol_bps = cfg2.qos_rate_bps;  // R_tol must stay below R_req
  CHECK_THROWS_AS(cfg2.validate(), std::invalid_argument);
}

}  // TEST_SUITE
