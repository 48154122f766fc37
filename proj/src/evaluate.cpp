#include "cachebeam/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "cachebeam/rng.hpp"

namespace cachebeam {

namespace {

constexpr std::uint64_t kTagTrain = 0x545241494e;  // "TRAIN"
constexpr std::uint64_t kTagTrial = 0x545249414c;  // "TRIAL"
constexpr std::uint64_t kTagAudit = 0x4155444954;  // "AUDIT"
constexpr std::uint64_t kTagWc = 0x57434552;       // "WCER"

double quad_form(const Eigen::VectorXcd& h, const Eigen::MatrixXcd& a) {
  return (h.adjoint() * a * h).real()(0, 0);
}

double log2_det_pd(const Eigen::MatrixXcd& a) {
  Eigen::LLT<Eigen::MatrixXcd> llt(a);
  if (llt.info() == Eigen::Success) {
    double s = 0.0;
    Eigen::MatrixXcd l = llt.matrixL();
    for (int i = 0; i < l.rows(); ++i) s += std::log2(std::real(l(i, i)));
    return 2.0 * s;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    s += std::log2(std::max(es.eigenvalues()(i), 1e-300));
  return s;
}

}  // namespace

double lr_sinr(const Eigen::VectorXcd& h, const std::vector<Eigen::MatrixXcd>& w, int rho,
               const Eigen::MatrixXcd& v) {
  double sig = quad_form(h, w[rho]);
  double denom = 1.0 + quad_form(h, v);  // unit noise
  for (std::size_t j = 0; j < w.size(); ++j)
    if (static_cast<int>(j) != rho) denom += quad_form(h, w[j]);
  return sig / denom;
}

double lr_rate(const Eigen::VectorXcd& h, const std::vector<Eigen::MatrixXcd>& w, int rho,
               const Eigen::MatrixXcd& v) {
  return std::log2(1.0 + lr_sinr(h, w, rho, v));
}

double er_capacity(const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& w,
                   const Eigen::MatrixXcd& v) {
  const int ne = static_cast<int>(g.cols());
  Eigen::MatrixXcd z = Eigen::MatrixXcd::Identity(ne, ne) + g.adjoint() * v * g;
  Eigen::MatrixXcd a = g.adjoint() * w * g;
  z = 0.5 * (z + z.adjoint()).eval();
  a = 0.5 * (a + a.adjoint()).eval();
  return log2_det_pd(z + a) - log2_det_pd(z);
}

double worst_case_er_rate(const Eigen::MatrixXcd& ghat, double eps, const Eigen::MatrixXcd& w,
                          const Eigen::MatrixXcd& v, int n_samples, std::uint64_t seed,
                          bool refine) {
  double best = er_capacity(ghat, w, v);
  if (eps <= 0.0) return best;
  const int rows = static_cast<int>(ghat.rows()), cols = static_cast<int>(ghat.cols());
  const double real_dim = 2.0 * rows * cols;
  RandomStream rng(seed);
  Eigen::MatrixXcd best_delta = Eigen::MatrixXcd::Zero(rows, cols);
  auto consider = [&](const Eigen::MatrixXcd& delta) {
    double r = er_capacity(ghat + delta, w, v);
    if (r > best) {
      best = r;
      best_delta = delta;
    }
  };
  for (int s = 0; s < n_samples; ++s) {
    Eigen::MatrixXcd d(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) d(i, j) = rng.cnormal();
    double nrm = d.norm();
    if (nrm < 1e-300) continue;
    // one point on the sphere, one in the ball (radius ~ u^(1/dim))
    consider((eps / nrm) * d);
    double radius = eps * std::pow(rng.uniform(), 1.0 / real_dim);
    consider((radius / nrm) * d);
  }
  if (refine) {
    // Projected numerical-gradient ascent from the best sampled point.
    Eigen::MatrixXcd x = best_delta;
    double fx = er_capacity(ghat + x, w, v);
    double step = 0.1 * eps;
    const double h = 1e-7 * (1.0 + eps);
    for (int it = 0; it < 80 && step > 1e-12 * eps; ++it) {
      Eigen::MatrixXcd grad(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
          Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(rows, cols);
          e(i, j) = h;
          double re = (er_capacity(ghat + x + e, w, v) - er_capacity(ghat + x - e, w, v)) /
                      (2.0 * h);
          e(i, j) = std::complex<double>(0.0, h);
          double im = (er_capacity(ghat + x + e, w, v) - er_capacity(ghat + x - e, w, v)) /
                      (2.0 * h);
          grad(i, j) = std::complex<double>(re, im);
        }
      double gn = grad.norm();
      if (gn < 1e-14) break;
      Eigen::MatrixXcd xn = x + (step / gn) * grad;
      if (xn.norm() > eps) xn *= eps / xn.norm();
      double fn = er_capacity(ghat + xn, w, v);
      if (fn > fx) {
        x = xn;
        fx = fn;
        step *= 1.2;
      } else {
        step *= 0.5;
      }
    }
    best = std::max(best, fx);
  }
  return best;
}

const char* to_string(CachingScheme s) {
  switch (s) {
    case CachingScheme::Optimized: return "optimized";
    case CachingScheme::NoSecurity: return "nosec";
    case CachingScheme::Preference: return "preference";
    case CachingScheme::Uniform: return "uniform";
  }
  return "?";
}

const char* to_string(DeliveryScheme s) {
  switch (s) {
    case DeliveryScheme::Greedy: return "greedy";
    case DeliveryScheme::Coordinated: return "coordinated";
    case DeliveryScheme::FullCooperation: return "fullcoop";
    case DeliveryScheme::NonRobust: return "nonrobust";
  }
  return "?";
}

std::string scheme_label(CachingScheme c, DeliveryScheme d) {
  return std::string(to_string(c)) + "+" + to_string(d);
}

int scheme_code(CachingScheme c, DeliveryScheme d) {
  return (static_cast<int>(c) + 1) * 10 + static_cast<int>(d) + 1;
}

AuditReport audit_solution(const SystemConfig& cfg, const ConstraintSet& set,
                           const TransmitSolution& ts, SecrecyMode mode,
                           const Eigen::MatrixXcd& design_g, std::uint64_t seed,
                           int er_samples) {
  AuditReport rep;
  rep.ok = true;
  std::vector<Eigen::MatrixXcd> wout;
  wout.reserve(ts.w.size());
  for (const auto& w : ts.w) wout.push_back(w * w.adjoint());

  rep.worst_bs_power_w = ts.per_bs_power.maxCoeff();
  if (rep.worst_bs_power_w > set.max_tx_power_w * (1.0 + 1e-6)) {
    rep.ok = false;
    rep.detail += "per-BS power exceeded; ";
  }
  rep.min_sinr = std::numeric_limits<double>::infinity();
  rep.max_design_er = 0.0;
  const double r_tol = cfg.tol_rate_bpshz();
  for (int rho = 0; rho < set.num_lr; ++rho) {
    // SINR from the outer products directly (h enters only through H_rho).
    double sig = (wout[rho].cwiseProduct(set.channel_outer[rho].conjugate())).sum().real();
    double denom = 1.0 + (ts.V.cwiseProduct(set.channel_outer[rho].conjugate())).sum().real();
    for (int j = 0; j < set.num_lr; ++j)
      if (j != rho)
        denom += (wout[j].cwiseProduct(set.channel_outer[rho].conjugate())).sum().real();
    double sinr = sig / denom;
    rep.min_sinr = std::min(rep.min_sinr, sinr);
    if (sinr < set.sinr_target * (1.0 - 1e-6)) {
      rep.ok = false;
      rep.detail += "SINR short at stream " + std::to_string(rho) + "; ";
    }
    double er;
    if (mode == SecrecyMode::Robust)
      er = worst_case_er_rate(design_g, set.csi_radius, wout[rho], ts.V, er_samples,
                              derive_seed(seed, {kTagWc, static_cast<std::uint64_t>(rho)}));
    else
      er = er_capacity(design_g, wout[rho], ts.V);
    rep.max_design_er = std::max(rep.max_design_er, er);
    if (er > r_tol + 1e-6) {
      rep.ok = false;
      rep.detail += "secrecy exceeded at stream " + std::to_string(rho) + "; ";
    }
  }
  if (rep.ok) rep.detail = "ok";
  return rep;
}

Eigen::MatrixXd nearest_bs_assignment(const SystemConfig& cfg, const Scenario& sc,
                                      const CacheMatrix& cache) {
  const int k = cfg.num_lr, m = cfg.num_bs;
  const double rate = cfg.subfile_rate_bps();
  Eigen::MatrixXd flags = Eigen::MatrixXd::Zero(k, m);
  Eigen::VectorXd residual = sc.backhaul_bps;
  for (int lr = 0; lr < k; ++lr) {
    int file = sc.requests[lr].file;
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      double da = (sc.topology.bs_positions.col(a) - sc.topology.lr_positions.col(lr)).norm();
      double db = (sc.topology.bs_positions.col(b) - sc.topology.lr_positions.col(lr)).norm();
      return da < db;
    });
    bool placed = false;
    for (int bs : order) {
      double cost = effective_backhaul_rate(cache.c(file, bs), rate);
      if (cost <= residual(bs) + 1e-9 * std::max(1.0, residual(bs))) {
        flags(lr, bs) = 1.0;
        residual(bs) -= cost;
        placed = true;
        break;
      }
    }
    if (!placed) return Eigen::MatrixXd();  // outage: request unservable
  }
  return flags;
}

TrialResult evaluate_delivery(const SystemConfig& cfg, const Scenario& sc,
                              const CacheMatrix& cache, DeliveryScheme scheme,
                              std::uint64_t seed, const SolveOptions& opts) {
  TrialResult tr;
  tr.scheme = to_string(scheme);
  tr.seed = seed;
  tr.cache_capacity_bits = cfg.cache_capacity_bits;
  ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
  const bool robust_csi = set.csi_radius > 0.0;
  const SecrecyMode prim_mode = robust_csi ? SecrecyMode::Robust : SecrecyMode::Perfect;

  CooperationDecision dec;
  TransmitSolution ts;
  Eigen::MatrixXd flags;  // per-stream flags actually used
  SecrecyMode used_mode = prim_mode;
  switch (scheme) {
    case DeliveryScheme::Greedy: {
      auto [d, s] = greedy_delivery(cfg, sc, cache, prim_mode, opts);
      dec = std::move(d);
      ts = std::move(s);
      flags = dec.stream_flags(set);
      break;
    }
    case DeliveryScheme::FullCooperation: {
      dec.files = requested_files(sc);
      dec.q = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(dec.files.size()), cfg.num_bs);
      dec.finalize(cache);
      flags = dec.stream_flags(set);
      ts = solve_fixed_cooperation(set, flags, prim_mode, opts, nullptr, seed);
      dec.candidate_solves = 1;
      break;
    }
    case DeliveryScheme::Coordinated: {
      dec.files = requested_files(sc);
      flags = nearest_bs_assignment(cfg, sc, cache);
      if (flags.size() == 0) {
        dec.q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dec.files.size()), cfg.num_bs);
        dec.finalize(cache);
        ts.status = TransmitSolution::Status::Infeasible;
        ts.message = "no BS with sufficient backhaul for some request";
        break;
      }
      dec.q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dec.files.size()), cfg.num_bs);
      for (int rho = 0; rho < cfg.num_lr; ++rho) {
        auto it = std::lower_bound(dec.files.begin(), dec.files.end(), sc.requests[rho].file);
        int fi = static_cast<int>(it - dec.files.begin());
        for (int m = 0; m < cfg.num_bs; ++m)
          if (flags(rho, m) > 0.5) dec.q(fi, m) = 1.0;
      }
      dec.finalize(cache);
      ts = solve_fixed_cooperation(set, flags, prim_mode, opts, nullptr, seed);
      dec.candidate_solves = 1;
      break;
    }
    case DeliveryScheme::NonRobust: {
      used_mode = SecrecyMode::Perfect;
      auto [d, s] = greedy_delivery(cfg, sc, cache, SecrecyMode::Perfect, opts);
      dec = std::move(d);
      ts = std::move(s);
      flags = dec.stream_flags(set);
      break;
    }
  }

  tr.removals = static_cast<int>(dec.removal_log.size());
  tr.candidate_solves = dec.candidate_solves;
  tr.message = ts.message;
  if (ts.status != TransmitSolution::Status::Feasible) {
    tr.feasible = false;
    tr.outage = true;
    return tr;
  }
  tr.feasible = true;
  tr.total_power_w = ts.total_power;
  tr.sdp_objective_w = ts.sdp_objective;
  tr.per_bs_power = ts.per_bs_power;
  tr.max_rank_ratio = ts.rank_ratios.size() ? ts.rank_ratios.maxCoeff() : 0.0;
  tr.avg_coop_bs = flags.rowwise().sum().mean();

  std::vector<Eigen::MatrixXcd> wout;
  wout.reserve(ts.w.size());
  for (const auto& w : ts.w) wout.push_back(w * w.adjoint());
  tr.lr_rates.resize(set.num_lr);
  tr.worst_case_er.resize(set.num_lr);
  for (int rho = 0; rho < set.num_lr; ++rho) {
    tr.lr_rates(rho) = lr_rate(sc.lr_channels[rho], wout, rho, ts.V);
    tr.worst_case_er(rho) = worst_case_er_rate(
        set.er_estimate, set.csi_radius, wout[rho], ts.V, 1000,
        derive_seed(seed, {kTagWc, static_cast<std::uint64_t>(rho)}));
  }

  const double r_req = cfg.qos_rate_bpshz(), r_tol = cfg.tol_rate_bpshz();
  double min_sec = std::numeric_limits<double>::infinity();
  if (scheme == DeliveryScheme::NonRobust) {
    for (int rho = 0; rho < set.num_lr; ++rho) {
      double re = er_capacity(sc.er_true, wout[rho], ts.V);
      min_sec = std::min(min_sec, std::max(0.0, tr.lr_rates(rho) - re));
    }
    tr.outage = min_sec < std::max(0.0, r_req - r_tol) - 1e-9;
  } else {
    for (int rho = 0; rho < set.num_lr; ++rho)
      min_sec = std::min(min_sec, std::max(0.0, tr.lr_rates(rho) - tr.worst_case_er(rho)));
    tr.outage = false;  // robust feasibility is the guarantee
  }
  tr.min_secrecy_rate = min_sec;

  AuditReport audit = audit_solution(cfg, set, ts, used_mode, set.er_estimate,
                                     derive_seed(seed, {kTagAudit}));
  tr.audit_ok = audit.ok;
  if (!audit.ok) tr.message = "audit: " + audit.detail;
  return tr;
}

TrialResult run_delivery_trial(const SystemConfig& cfg, const CacheMatrix& cache,
                               DeliveryScheme scheme, std::uint64_t seed,
                               const SolveOptions& opts) {
  Scenario sc = generate_scenario(cfg, seed);
  return evaluate_delivery(cfg, sc, cache, scheme, seed, opts);
}

double secrecy_outage_probability(const std::vector<TrialResult>& trials) {
  if (trials.empty()) throw std::invalid_argument("no trials");
  int n = 0;
  for (const auto& t : trials) n += t.outage ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(trials.size());
}

std::vector<Scenario> training_scenarios(const SystemConfig& cfg, std::uint64_t master_seed,
                                         int point_index) {
  std::vector<Scenario> out;
  out.reserve(cfg.num_training_scenarios);
  for (int w = 0; w < cfg.num_training_scenarios; ++w)
    out.push_back(generate_scenario(
        cfg, derive_seed(master_seed, {kTagTrain, static_cast<std::uint64_t>(point_index),
                                       static_cast<std::uint64_t>(w)})));
  return out;
}

CacheMatrix build_cache(const SystemConfig& cfg, CachingScheme scheme,
                        std::uint64_t master_seed, int point_index, const SolveOptions& opts) {
  switch (scheme) {
    case CachingScheme::Preference: return preference_caching(cfg);
    case CachingScheme::Uniform: return uniform_caching(cfg);
    case CachingScheme::Optimized:
    case CachingScheme::NoSecurity: {
      auto scen = training_scenarios(cfg, master_seed, point_index);
      return train_cache(cfg, scen, scheme == CachingScheme::Optimized, opts).cache;
    }
  }
  throw std::logic_error("unknown caching scheme");
}

SweepRow evaluate_sweep_point(const SystemConfig& cfg, const CacheMatrix& cache,
                              DeliveryScheme delivery, int n_trials,
                              std::uint64_t master_seed, int point_index, int code,
                              const std::string& label, const SolveOptions& opts,
                              const TrialSink& sink) {
  SweepRow row;
  row.scheme = label;
  row.master_seed = master_seed;
  double power_sum = 0.0, coop_sum = 0.0;
  int n_feas = 0, n_out = 0;
  for (int t = 0; t < n_trials; ++t) {
    std::uint64_t seed = derive_seed(
        master_seed, {kTagTrial, static_cast<std::uint64_t>(point_index),
                      static_cast<std::uint64_t>(code), static_cast<std::uint64_t>(t)});
    TrialResult tr = run_delivery_trial(cfg, cache, delivery, seed, opts);
    if (tr.feasible) {
      ++n_feas;
      power_sum += tr.total_power_w;
      coop_sum += tr.avg_coop_bs;
    }
    if (tr.outage) ++n_out;
    if (sink) sink(point_index, t, tr);
  }
  row.n_trials = n_trials;
  row.n_feasible = n_feas;
  row.p_out = static_cast<double>(n_out) / n_trials;
  if (n_feas > 0) {
    row.avg_power_w = power_sum / n_feas;
    row.avg_power_dbm = watts_to_dbm(row.avg_power_w);
    row.avg_coop_bs = coop_sum / n_feas;
  }
  return row;
}

namespace {

template <class Mutate>
std::vector<SweepRow> sweep_impl(const SystemConfig& base, CachingScheme caching,
                                 DeliveryScheme delivery, const std::vector<double>& grid,
                                 int n_trials, std::uint64_t master_seed,
                                 const SolveOptions& opts, const TrialSink& sink,
                                 Mutate&& mutate) {
  if (grid.empty()) throw std::invalid_argument("sweep grid is empty");
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw std::invalid_argument("sweep grid must be ascending");
  if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
  std::vector<SweepRow> rows;
  const int code = scheme_code(caching, delivery);
  const std::string label = scheme_label(caching, delivery);
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    SystemConfig cfg = base;
    mutate(cfg, grid[gi]);
    cfg.validate();
    CacheMatrix cache;
    try {
      cache = build_cache(cfg, caching, master_seed, static_cast<int>(gi), opts);
    } catch (const TrainingInfeasible&) {
      SweepRow row;
      row.swept_value = grid[gi];
      row.scheme = label;
      row.master_seed = master_seed;
      row.trained = false;
      rows.push_back(row);
      continue;
    }
    SweepRow row = evaluate_sweep_point(cfg, cache, delivery, n_trials, master_seed,
                                        static_cast<int>(gi), code, label, opts, sink);
    row.swept_value = grid[gi];
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::vector<SweepRow> run_cache_sweep(const SystemConfig& cfg, CachingScheme caching,
                                      DeliveryScheme delivery,
                                      const std::vector<double>& capacity_pct_grid,
                                      int n_trials, std::uint64_t master_seed,
                                      const SolveOptions& opts, const TrialSink& sink) {
  return sweep_impl(cfg, caching, delivery, capacity_pct_grid, n_trials, master_seed, opts,
                    sink, [](SystemConfig& c, double pct) {
                      c.cache_capacity_bits = pct / 100.0 * c.library_bits();
                    });
}

std::vector<SweepRow> run_csi_error_sweep(const SystemConfig& cfg, CachingScheme caching,
                                          DeliveryScheme delivery,
                                          const std::vector<double>& alpha2_grid, int n_trials,
                                          std::uint64_t master_seed, const SolveOptions& opts,
                                          const TrialSink& sink) {
  return sweep_impl(cfg, caching, delivery, alpha2_grid, n_trials, master_seed, opts, sink,
                    [](SystemConfig& c, double a2) { c.normalized_csi_error = a2; });
}

std::vector<SweepRow> run_antenna_sweep(const SystemConfig& cfg, CachingScheme caching,
                                        DeliveryScheme delivery,
                                        const std::vector<double>& nt_grid, int n_trials,
                                        std::uint64_t master_seed, const SolveOptions& opts,
                                        const TrialSink& sink) {
  return sweep_impl(cfg, caching, delivery, nt_grid, n_trials, master_seed, opts, sink,
                    [](SystemConfig& c, double nt) {
                      if (nt < 1.0 || nt != std::floor(nt))
                        throw std::invalid_argument("antenna grid must hold positive integers");
                      c.antennas_per_bs = static_cast<int>(nt);
                    });
}

double watts_to_dbm(double watts) { return 10.0 * std::log10(watts * 1000.0); }

namespace {

void append_field(std::string& out, double v) {
  char buf[64];
  if (std::isnan(v))
    std::snprintf(buf, sizeof buf, "nan");
  else
    std::snprintf(buf, sizeof buf, "%.6f", v);
  out += buf;
}

}  // namespace

std::string csv_text(const std::vector<SweepRow>& rows) {
  std::string out =
      "capacity_pct,scheme,n_trials,n_feasible,avg_power_dBm,p_out,avg_coop_bs,master_seed\n";
  char buf[128];
  for (const auto& r : rows) {
    append_field(out, r.swept_value);
    out += ",";
    out += r.scheme;
    std::snprintf(buf, sizeof buf, ",%d,%d,", r.n_trials, r.n_feasible);
    out += buf;
    append_field(out, r.avg_power_dbm);
    out += ",";
    append_field(out, r.trained ? r.p_out : std::numeric_limits<double>::quiet_NaN());
    out += ",";
    append_field(out, r.avg_coop_bs);
    std::snprintf(buf, sizeof buf, ",%llu\n", static_cast<unsigned long long>(r.master_seed));
    out += buf;
  }
  return out;
}

void write_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp);
    f << csv_text(rows);
    if (!f.good()) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("atomic rename failed for " + path);
}

}  // namespace cachebeam
