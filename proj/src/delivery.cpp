#include "cachebeam/delivery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cachebeam/rng.hpp"

namespace cachebeam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int file_row(const std::vector<int>& files, int file) {
  auto it = std::lower_bound(files.begin(), files.end(), file);
  if (it == files.end() || *it != file) throw std::logic_error("file not in requested set");
  return static_cast<int>(it - files.begin());
}

double re_trace_prod(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a.cwiseProduct(b.conjugate())).sum().real();  // <A, B> = Re tr(A^H B), A Hermitian
}

}  // namespace

Eigen::MatrixXd CooperationDecision::stream_flags(const ConstraintSet& set) const {
  Eigen::MatrixXd flags(set.num_lr, q.cols());
  for (int rho = 0; rho < set.num_lr; ++rho)
    flags.row(rho) = q.row(file_row(files, set.stream_files[rho]));
  return flags;
}

void CooperationDecision::finalize(const CacheMatrix& cache) {
  b = q;
  coop_sets.assign(files.size(), {});
  for (std::size_t fi = 0; fi < files.size(); ++fi)
    for (Eigen::Index m = 0; m < q.cols(); ++m) {
      b(fi, m) = (1.0 - cache.c(files[fi], m)) * q(fi, m);
      if (q(fi, m) > 0.5) coop_sets[fi].push_back(static_cast<int>(m));
    }
}

double effective_backhaul_rate(double cached_fraction, double stream_rate_bps) {
  if (cached_fraction < 0.0 || cached_fraction > 1.0)
    throw std::invalid_argument("cached fraction outside [0,1]");
  return (1.0 - cached_fraction) * stream_rate_bps;
}

std::vector<int> violation_set(const Eigen::MatrixXd& q, const std::vector<int>& files,
                               const CacheMatrix& cache, double stream_rate_bps,
                               const Eigen::VectorXd& backhaul_bps) {
  std::vector<int> vio;
  for (Eigen::Index m = 0; m < q.cols(); ++m) {
    double load = 0.0;
    for (std::size_t fi = 0; fi < files.size(); ++fi)
      if (q(fi, m) > 0.5)
        load += effective_backhaul_rate(cache.c(files[fi], m), stream_rate_bps);
    if (load > backhaul_bps(m) + 1e-9 * std::max(1.0, backhaul_bps(m)))
      vio.push_back(static_cast<int>(m));
  }
  return vio;
}

std::pair<double, double> secrecy_slack_margin(const ConstraintSet& set,
                                               const Eigen::MatrixXcd& W,
                                               const Eigen::MatrixXcd& V) {
  const int ne = set.er_antennas, n = set.n;
  // Work in the same scaled coordinates the solver's LMI uses: conjugating
  // the S-procedure matrix by diag(I_ne, eps*I_n) turns the slack block
  // diag(-I, I/eps^2) into diag(-I, I), so every entry stays on the kappa
  // scale across the whole search range.  Raw coordinates would put the
  // matrix norm at delta/eps^2 for mid-search delta, and the absolute error
  // of lambda_min (norm * ulp) would swamp the margin being measured.
  // Feasibility -- the sign of the best margin -- is congruence-invariant.
  Eigen::MatrixXcd u = set.robust_stack;
  u.rightCols(n) *= set.csi_radius;
  Eigen::MatrixXcd t = W - set.an_weight * V;
  Eigen::MatrixXcd m0 = -u.adjoint() * t * u;
  for (int i = 0; i < ne; ++i) m0(i, i) += set.secrecy_kappa;

  auto lmin = [&](double d) {
    Eigen::MatrixXcd m = m0;
    for (int i = 0; i < ne; ++i) m(i, i) -= d;
    for (int i = ne; i < ne + n; ++i) m(i, i) += d;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  };
  // lambda_min is concave in delta and provably decaying past this bound.
  double lo = 0.0, hi = set.secrecy_kappa + 2.0 * m0.norm() + 1.0;
  for (int it = 0; it < 200 && (hi - lo) > 1e-13 * (1.0 + hi); ++it) {
    double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
    if (lmin(a) < lmin(b))
      lo = a;
    else
      hi = b;
  }
  double d = 0.5 * (lo + hi);
  double f0 = lmin(0.0), fd = lmin(d);
  return fd >= f0 ? std::make_pair(fd, d) : std::make_pair(f0, 0.0);
}

ExtractResult extract_beamformer(const Eigen::MatrixXcd& W, double tol) {
  ExtractResult res;
  const int n = static_cast<int>(W.rows());
  if (W.trace().real() <= 1e-12) {
    res.w = Eigen::VectorXcd::Zero(n);
    res.rank_ratio = 0.0;
    res.clean = true;
    return res;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(W);
  double l1 = es.eigenvalues()(n - 1);
  double l2 = n > 1 ? std::max(es.eigenvalues()(n - 2), 0.0) : 0.0;
  res.rank_ratio = l2 / std::max(l1, 1e-300);
  res.clean = res.rank_ratio <= tol;
  res.w = std::sqrt(std::max(l1, 0.0)) * es.eigenvectors().col(n - 1);
  return res;
}

TransmitSolution solve_fixed_cooperation(const ConstraintSet& set,
                                         const Eigen::MatrixXd& flags, SecrecyMode mode,
                                         const SolveOptions& opts,
                                         const Eigen::MatrixXcd* perfect_g,
                                         std::uint64_t extraction_seed) {
  TransmitSolution ts;
  for (int rho = 0; rho < set.num_lr; ++rho)
    if (flags.row(rho).maxCoeff() < 0.5) {
      ts.status = TransmitSolution::Status::Infeasible;
      ts.message = "stream " + std::to_string(rho) + " has no serving BS";
      return ts;
    }

  DeliveryLayout layout;
  SdpProblem prob = assemble_delivery(set, flags, mode, layout, perfect_g);
  SdpSolution sol = solve_sdp(prob, opts);
  ts.sdp_objective = sol.objective;
  ts.sdp_iterations = sol.iterations;
  ts.feas_margin = sol.feas_margin;
  if (sol.status == SdpStatus::Infeasible) {
    ts.status = TransmitSolution::Status::Infeasible;
    ts.message = sol.message;
    return ts;
  }
  if (sol.status != SdpStatus::Optimal) {
    ts.status = TransmitSolution::Status::RankFailure;
    ts.message = "solver failure: " + sol.message;
    return ts;
  }

  DeliveryVars vars = unpack_delivery(set, layout, sol);
  ts.W = vars.W;
  ts.V = vars.V;
  ts.delta = vars.delta;
  const Eigen::MatrixXcd& g = perfect_g ? *perfect_g : set.er_estimate;

  const int k = set.num_lr;
  // The big-M rows force tr(Lambda_m W_rho) <= 0 when a flag is off; the exact
  // optimum has those rows/columns identically zero, so project out the
  // interior-point residue before extraction. The reported relaxed objective
  // is recomputed from the projected traces to keep the trace identity exact.
  {
    const int nt0 = set.n / set.num_bs;
    for (int rho = 0; rho < k; ++rho)
      for (int m = 0; m < set.num_bs; ++m)
        if (flags(rho, m) < 0.5) {
          ts.W[rho].middleRows(m * nt0, nt0).setZero();
          ts.W[rho].middleCols(m * nt0, nt0).setZero();
        }
    double obj = ts.V.trace().real();
    for (const auto& wr : ts.W) obj += wr.trace().real();
    ts.sdp_objective = obj;
  }
  ts.w.resize(k);
  ts.rank_ratios.resize(k);
  const int ntb = set.n / set.num_bs;
  auto zero_off_blocks = [&](Eigen::VectorXcd& wv, int rho) {
    for (int m = 0; m < set.num_bs; ++m)
      if (flags(rho, m) < 0.5) wv.segment(m * ntb, ntb).setZero();
  };
  for (int rho = 0; rho < k; ++rho) {
    ExtractResult ex = extract_beamformer(ts.W[rho]);
    ts.rank_ratios(rho) = ex.rank_ratio;
    if (ex.clean) {
      ts.w[rho] = ex.w;
      zero_off_blocks(ts.w[rho], rho);
      continue;
    }
    // Gaussian randomization: draw candidates with the covariance of the
    // relaxed solution, rescale to meet the SINR row with equality, keep the
    // cheapest candidate satisfying every other constraint.
    RandomStream rng(derive_seed(extraction_seed, {0x52414e44u, static_cast<std::uint64_t>(rho)}));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(ts.W[rho]);
    Eigen::MatrixXcd a =
        es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    double interference = 1.0;  // unit noise
    for (int j = 0; j < k; ++j)
      if (j != rho) interference += re_trace_prod(set.channel_outer[rho], ts.W[j]);
    interference += re_trace_prod(set.channel_outer[rho], ts.V);

    bool found = false;
    Eigen::VectorXcd best;
    double best_power = kInf;
    for (int cand = 0; cand < 100; ++cand) {
      Eigen::VectorXcd z(set.n);
      for (int i = 0; i < set.n; ++i) z(i) = rng.cnormal();
      Eigen::VectorXcd wc = a * z;
      zero_off_blocks(wc, rho);
      double gain = (wc.adjoint() * set.channel_outer[rho] * wc).real()(0);
      if (gain < 1e-30) continue;
      wc *= std::sqrt(set.sinr_target * interference / gain);
      Eigen::MatrixXcd wmat = wc * wc.adjoint();
      bool ok = true;
      const int nt = set.n / set.num_bs;
      for (int m = 0; m < set.num_bs && ok; ++m) {
        double blk = wc.segment(m * nt, nt).squaredNorm();
        if (blk > flags(rho, m) * set.max_tx_power_w + 1e-9 * set.max_tx_power_w) ok = false;
        double total = blk + re_trace_prod(set.bs_selector[m].cast<std::complex<double>>(), ts.V);
        for (int j = 0; j < k; ++j)
          if (j != rho)
            total += re_trace_prod(set.bs_selector[m].cast<std::complex<double>>(), ts.W[j]);
        if (total > set.max_tx_power_w * (1.0 + 1e-9)) ok = false;
      }
      for (int j = 0; j < k && ok; ++j) {
        double sig = 0.0, denom = 1.0;
        for (int l = 0; l < k; ++l) {
          const Eigen::MatrixXcd& wl = (l == rho) ? wmat : ts.W[l];
          double t = re_trace_prod(set.channel_outer[j], wl);
          if (l == j)
            sig = t;
          else
            denom += t;
        }
        denom += re_trace_prod(set.channel_outer[j], ts.V);
        if (sig < set.sinr_target * denom * (1.0 - 1e-9)) ok = false;
      }
      if (ok) {
        if (mode == SecrecyMode::Robust) {
          if (secrecy_slack_margin(set, wmat, ts.V).first < -1e-9) ok = false;
        } else {
          Eigen::MatrixXcd lhs = g.adjoint() * (wmat - set.an_weight * ts.V) * g;
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eg(lhs, Eigen::EigenvaluesOnly);
          if (eg.eigenvalues().maxCoeff() > set.secrecy_kappa + 1e-9) ok = false;
        }
      }
      if (ok && wc.squaredNorm() < best_power) {
        best_power = wc.squaredNorm();
        best = wc;
        found = true;
      }
    }
    if (!found) {
      ts.status = TransmitSolution::Status::RankFailure;
      ts.message = "randomization failed for stream " + std::to_string(rho) +
                   " (rank ratio " + std::to_string(ex.rank_ratio) + ")";
      return ts;
    }
    ts.w[rho] = best;
  }

  ts.total_power = ts.V.trace().real();
  for (const auto& w : ts.w) ts.total_power += w.squaredNorm();
  ts.per_bs_power.resize(set.num_bs);
  const int nt = set.n / set.num_bs;
  for (int m = 0; m < set.num_bs; ++m) {
    double p = ts.V.block(m * nt, m * nt, nt, nt).trace().real();
    for (const auto& w : ts.w) p += w.segment(m * nt, nt).squaredNorm();
    ts.per_bs_power(m) = p;
  }
  ts.status = TransmitSolution::Status::Feasible;
  ts.message = "ok";
  return ts;
}

std::pair<CooperationDecision, TransmitSolution> greedy_delivery(
    const SystemConfig& cfg, const Scenario& sc, const CacheMatrix& cache, SecrecyMode mode,
    const SolveOptions& opts, const Eigen::MatrixXcd* perfect_g) {
  ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  CooperationDecision dec;
  dec.files = requested_files(sc);
  const int nf = static_cast<int>(dec.files.size());
  const int mbs = cfg.num_bs;
  dec.q = Eigen::MatrixXd::Ones(nf, mbs);
  const double rate = cfg.subfile_rate_bps();

  TransmitSolution current =
      solve_fixed_cooperation(set, dec.stream_flags(set), mode, opts, perfect_g);
  dec.candidate_solves = 1;
  if (current.status != TransmitSolution::Status::Feasible) {
    dec.finalize(cache);
    return {dec, current};  // full cooperation already fails: outage
  }

  int guard = nf * mbs + 1;
  while (guard-- > 0) {
    std::vector<int> vio = violation_set(dec.q, dec.files, cache, rate, sc.backhaul_bps);
    if (vio.empty()) break;
    double best_obj = kInf;
    int best_fi = -1, best_m = -1;
    TransmitSolution best_sol;
    for (int m : vio) {
      for (int fi = 0; fi < nf; ++fi) {
        if (dec.q(fi, m) < 0.5) continue;
        Eigen::MatrixXd qc = dec.q;
        qc(fi, m) = 0.0;
        CooperationDecision tmp;
        tmp.files = dec.files;
        tmp.q = qc;
        TransmitSolution cand =
            solve_fixed_cooperation(set, tmp.stream_flags(set), mode, opts, perfect_g);
        ++dec.candidate_solves;
        double obj = kInf;
        if (cand.status == TransmitSolution::Status::Feasible ||
            (cand.status == TransmitSolution::Status::RankFailure &&
             cand.message.rfind("randomization", 0) == 0))
          obj = cand.sdp_objective;
        if (obj < best_obj) {  // strict: first candidate wins ties (lowest m, then file)
          best_obj = obj;
          best_fi = fi;
          best_m = m;
          best_sol = cand;
        }
      }
    }
    if (!(best_obj < kInf)) {
      // Dead end: every remaining membership at a violated BS is unusable
      // (serving it would exceed the backhaul), so the returned decision
      // strips them; with zero backhaul and empty caches this empties q.
      for (int m : vio)
        for (int fi = 0; fi < nf; ++fi) dec.q(fi, m) = 0.0;
      dec.finalize(cache);
      TransmitSolution out;
      out.status = TransmitSolution::Status::Infeasible;
      out.message = "no backhaul-feasible cooperation set remains";
      return {dec, out};
    }
    dec.removal_log.push_back({dec.files[best_fi], best_m, best_obj - current.sdp_objective});
    dec.q(best_fi, best_m) = 0.0;
    current = best_sol;
  }
  dec.finalize(cache);
  if (current.status != TransmitSolution::Status::Feasible) {
    // The argmin kept an extraction-failed candidate; report it as such.
    return {dec, current};
  }
  return {dec, current};
}

std::pair<CooperationDecision, TransmitSolution> exhaustive_delivery(
    const SystemConfig& cfg, const Scenario& sc, const CacheMatrix& cache, SecrecyMode mode,
    const SolveOptions& opts, int size_cap) {
  ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  CooperationDecision dec;
  dec.files = requested_files(sc);
  const int nf = static_cast<int>(dec.files.size());
  const int mbs = cfg.num_bs;
  const int bits = nf * mbs;
  if (bits > size_cap)
    throw std::invalid_argument("exhaustive search refused: " + std::to_string(bits) +
                                " flag bits exceed cap " + std::to_string(size_cap));
  const double rate = cfg.subfile_rate_bps();

  auto mask_to_q = [&](unsigned mask) {
    Eigen::MatrixXd q(nf, mbs);
    for (int fi = 0; fi < nf; ++fi)
      for (int m = 0; m < mbs; ++m) q(fi, m) = (mask >> (fi * mbs + m)) & 1u ? 1.0 : 0.0;
    return q;
  };
  auto feasible = [&](unsigned mask) {
    return violation_set(mask_to_q(mask), dec.files, cache, rate, sc.backhaul_bps).empty();
  };

  double best_obj = kInf;
  unsigned best_mask = 0;
  TransmitSolution best_sol;
  bool any_candidate = false;
  for (unsigned mask = 0; mask < (1u << bits); ++mask) {
    if (!feasible(mask)) continue;
    bool maximal = true;
    for (int bit = 0; bit < bits && maximal; ++bit)
      if (!((mask >> bit) & 1u) && feasible(mask | (1u << bit))) maximal = false;
    if (!maximal) continue;  // a feasible superset dominates (monotonicity)
    any_candidate = true;
    CooperationDecision tmp;
    tmp.files = dec.files;
    tmp.q = mask_to_q(mask);
    TransmitSolution cand =
        solve_fixed_cooperation(set, tmp.stream_flags(set), mode, opts);
    ++dec.candidate_solves;
    if (cand.status != TransmitSolution::Status::Feasible) continue;
    if (cand.sdp_objective < best_obj) {
      best_obj = cand.sdp_objective;
      best_mask = mask;
      best_sol = cand;
    }
  }
  if (!(best_obj < kInf)) {
    dec.q = Eigen::MatrixXd::Zero(nf, mbs);
    dec.finalize(cache);
    TransmitSolution out;
    out.status = TransmitSolution::Status::Infeasible;
    out.message = any_candidate ? "every maximal cooperation set is transmit-infeasible"
                                : "no backhaul-feasible cooperation set exists";
    return {dec, out};
  }
  dec.q = mask_to_q(best_mask);
  dec.finalize(cache);
  return {dec, best_sol};
}

}  // namespace cachebeam
