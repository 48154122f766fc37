#include "cachebeam/caching.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cachebeam {

void CacheMatrix::validate(const SystemConfig& cfg) const {
  if (c.rows() != cfg.num_files || c.cols() != cfg.num_bs)
    throw std::invalid_argument("cache matrix shape mismatch");
  if ((c.array() < -1e-12).any() || (c.array() > 1.0 + 1e-12).any())
    throw std::invalid_argument("cache fractions outside [0,1]");
  for (int m = 0; m < cfg.num_bs; ++m) {
    double stored = c.col(m).sum() * cfg.file_size_bits;
    if (stored > cfg.cache_capacity_bits * (1.0 + 1e-6) + 1e-6)
      throw std::invalid_argument("cache capacity exceeded at bs " + std::to_string(m));
  }
}

std::string CacheMatrix::serialize(const std::string& config_hash) const {
  std::ostringstream os;
  os << "cachemat v1 config " << config_hash << "\n";
  os << c.rows() << " " << c.cols() << "\n";
  char buf[64];
  for (Eigen::Index f = 0; f < c.rows(); ++f) {
    for (Eigen::Index m = 0; m < c.cols(); ++m) {
      std::snprintf(buf, sizeof buf, "%a", c(f, m));
      os << buf << (m + 1 < c.cols() ? " " : "\n");
    }
  }
  return os.str();
}

CacheMatrix CacheMatrix::parse(const std::string& text, const std::string& expected_hash) {
  std::istringstream is(text);
  std::string magic, ver, key, hash;
  is >> magic >> ver >> key >> hash;
  if (magic != "cachemat" || ver != "v1" || key != "config")
    throw std::invalid_argument("not a cache table");
  if (!expected_hash.empty() && hash != expected_hash)
    throw std::invalid_argument("cache built for config " + hash + ", expected " + expected_hash);
  Eigen::Index rows = 0, cols = 0;
  is >> rows >> cols;
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("bad cache table shape");
  CacheMatrix cm;
  cm.c.resize(rows, cols);
  for (Eigen::Index f = 0; f < rows; ++f)
    for (Eigen::Index m = 0; m < cols; ++m) {
      std::string tok;
      if (!(is >> tok)) throw std::invalid_argument("truncated cache table");
      cm.c(f, m) = std::strtod(tok.c_str(), nullptr);
    }
  return cm;
}

CacheMatrix CacheMatrix::parse_file(const std::string& path, const std::string& expected_hash) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), expected_hash);
}

CacheMatrix preference_caching(const SystemConfig& cfg) {
  // Zipf popularity is already sorted descending in the file index, so the
  // knapsack fill is a prefix of full copies plus one fractional file.
  CacheMatrix cm;
  cm.c = Eigen::MatrixXd::Zero(cfg.num_files, cfg.num_bs);
  Eigen::VectorXd theta = zipf_popularity(cfg.num_files, cfg.zipf_exponent);
  std::vector<int> order(cfg.num_files);
  for (int f = 0; f < cfg.num_files; ++f) order[f] = f;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return theta(a) > theta(b); });
  for (int m = 0; m < cfg.num_bs; ++m) {
    double remaining = cfg.cache_capacity_bits;
    for (int f : order) {
      if (remaining <= 0) break;
      double frac = std::min(1.0, remaining / cfg.file_size_bits);
      cm.c(f, m) = frac;
      remaining -= frac * cfg.file_size_bits;
    }
  }
  return cm;
}

CacheMatrix uniform_caching(const SystemConfig& cfg) {
  double per_file_bits =
      std::min(cfg.cache_capacity_bits, cfg.library_bits()) / cfg.num_files;
  double frac = per_file_bits / cfg.file_size_bits;
  CacheMatrix cm;
  cm.c = Eigen::MatrixXd::Constant(cfg.num_files, cfg.num_bs, frac);
  return cm;
}

namespace {

void add_unit_box(SdpProblem& prob, int var, const std::string& name) {
  SdpProblem::ScalarConstraint up;
  up.name = name + "_ub";
  up.scalars.push_back({var, 1.0});
  up.rel = SdpProblem::Rel::LE;
  up.rhs = 1.0;
  prob.add_scalar_constraint(std::move(up));
}

}  // namespace

SdpProblem assemble_training(const SystemConfig& cfg, const std::vector<Scenario>& scenarios,
                             bool include_secrecy, TrainingLayout& layout) {
  if (scenarios.empty()) throw std::invalid_argument("training needs at least one scenario");
  const int F = cfg.num_files, M = cfg.num_bs;
  const int omega = static_cast<int>(scenarios.size());
  const double q_rate = cfg.subfile_rate_bps();

  SdpProblem prob;
  layout = TrainingLayout{};
  layout.num_files = F;
  layout.num_bs = M;
  layout.c_vars.reserve(F * M);
  for (int f = 0; f < F; ++f)
    for (int m = 0; m < M; ++m) {
      std::string nm = "c_f" + std::to_string(f) + "_m" + std::to_string(m);
      int v = prob.add_scalar(nm, 0.0);
      layout.c_vars.push_back(v);
      add_unit_box(prob, v, nm);
    }
  // Per-BS storage capacity.
  for (int m = 0; m < M; ++m) {
    SdpProblem::ScalarConstraint cap;
    cap.name = "cap_m" + std::to_string(m);
    for (int f = 0; f < F; ++f) cap.scalars.push_back({layout.c_vars[f * M + m], cfg.file_size_bits});
    cap.rel = SdpProblem::Rel::LE;
    cap.rhs = cfg.cache_capacity_bits;
    prob.add_scalar_constraint(std::move(cap));
  }

  // Scenario-averaged backhaul loads, accumulated while scenarios are added.
  std::vector<SdpProblem::ScalarConstraint> backhaul(M);
  for (int m = 0; m < M; ++m) {
    backhaul[m].name = "bh_m" + std::to_string(m);
    backhaul[m].rel = SdpProblem::Rel::LE;
    backhaul[m].rhs = 0.0;
  }

  const bool robust = cfg.normalized_csi_error > 0.0;
  for (int s = 0; s < omega; ++s) {
    const Scenario& sc = scenarios[s];
    ConstraintSet set = ConstraintSet::from_scenario(cfg, sc);
    TrainingLayout::PerScenario ps;
    ps.files = requested_files(sc);
    const int nf = static_cast<int>(ps.files.size());
    const std::string tag = "s" + std::to_string(s) + "_";

    const int dim = 2 * set.n;
    for (int rho = 0; rho < set.num_lr; ++rho) {
      int b = prob.add_psd_block(tag + "W" + std::to_string(rho), dim);
      prob.set_block_objective(b, (0.5 / omega) * Eigen::MatrixXd::Identity(dim, dim));
      ps.delivery.w_blocks.push_back(b);
    }
    ps.delivery.v_block = prob.add_psd_block(tag + "V", dim);
    prob.set_block_objective(ps.delivery.v_block,
                             (0.5 / omega) * Eigen::MatrixXd::Identity(dim, dim));

    for (int fi = 0; fi < nf; ++fi)
      for (int m = 0; m < M; ++m) {
        std::string base = tag + "f" + std::to_string(ps.files[fi]) + "_m" + std::to_string(m);
        int qv = prob.add_scalar(base + "_q", 0.0);
        int bv = prob.add_scalar(base + "_b", 0.0);
        ps.q_vars.push_back(qv);
        ps.b_vars.push_back(bv);
        add_unit_box(prob, qv, base + "_q");
        add_unit_box(prob, bv, base + "_b");
        // Availability: cached fraction plus backhaul fetch covers cooperation.
        SdpProblem::ScalarConstraint avail;
        avail.name = base + "_avail";
        avail.scalars.push_back({layout.c_vars[ps.files[fi] * M + m], 1.0});
        avail.scalars.push_back({bv, 1.0});
        avail.scalars.push_back({qv, -1.0});
        avail.rel = SdpProblem::Rel::GE;
        avail.rhs = 0.0;
        prob.add_scalar_constraint(std::move(avail));
        backhaul[m].scalars.push_back({bv, q_rate});
      }
    for (int m = 0; m < M; ++m) backhaul[m].rhs += sc.backhaul_bps(m);

    // Relaxed on/off coupling: per-BS power of each stream capped by q*P_max.
    for (int rho = 0; rho < set.num_lr; ++rho) {
      int fi = static_cast<int>(std::lower_bound(ps.files.begin(), ps.files.end(),
                                                 set.stream_files[rho]) -
                                ps.files.begin());
      for (int m = 0; m < M; ++m) {
        SdpProblem::ScalarConstraint con;
        con.name = tag + "bigm_r" + std::to_string(rho) + "_m" + std::to_string(m);
        con.blocks.push_back({ps.delivery.w_blocks[rho], embed_herm_coeff(set.bs_selector[m])});
        con.scalars.push_back({ps.q_vars[fi * M + m], -set.max_tx_power_w});
        con.rel = SdpProblem::Rel::LE;
        con.rhs = 0.0;
        prob.add_scalar_constraint(std::move(con));
      }
    }
    add_power_constraints(prob, ps.delivery, set);
    add_sinr_constraints(prob, ps.delivery, set);
    if (include_secrecy) {
      if (robust)
        add_robust_secrecy(prob, ps.delivery, set);
      else
        add_perfect_secrecy(prob, ps.delivery, set, sc.er_true);
    }
    layout.scen.push_back(std::move(ps));
  }
  for (int m = 0; m < M; ++m) prob.add_scalar_constraint(std::move(backhaul[m]));
  return prob;
}

TrainResult train_cache(const SystemConfig& cfg, const std::vector<Scenario>& scenarios,
                        bool include_secrecy, const SolveOptions& opts) {
  TrainingLayout layout;
  SdpProblem prob = assemble_training(cfg, scenarios, include_secrecy, layout);
  SdpSolution sol = solve_sdp(prob, opts);
  if (sol.status == SdpStatus::Infeasible) {
    // Distinguish a storage bottleneck from transmit-side infeasibility by
    // re-solving with unlimited caches.
    SystemConfig relaxed = cfg;
    relaxed.cache_capacity_bits = relaxed.library_bits();
    TrainingLayout l2;
    SdpProblem p2 = assemble_training(relaxed, scenarios, include_secrecy, l2);
    SdpSolution s2 = solve_sdp(p2, opts);
    if (s2.status == SdpStatus::Optimal)
      throw TrainingInfeasible("training infeasible: cache capacity too small");
    throw TrainingInfeasible(
        "training infeasible: QoS/secrecy constraints unsatisfiable even with full caches");
  }
  if (sol.status != SdpStatus::Optimal)
    throw std::runtime_error("training solve failed: " + sol.message);

  const int F = cfg.num_files, M = cfg.num_bs;
  TrainResult res;
  res.cache.c.resize(F, M);
  for (int f = 0; f < F; ++f)
    for (int m = 0; m < M; ++m) {
      double v = sol.scalar_values(layout.c_vars[f * M + m]);
      v = std::clamp(v, 0.0, 1.0);
      if (v < 1e-6) v = 0.0;
      if (v > 1.0 - 1e-6) v = 1.0;
      res.cache.c(f, m) = v;
    }
  res.objective = sol.objective;
  res.iterations = sol.iterations;
  int near = 0, total = 0;
  for (const auto& ps : layout.scen)
    for (int qv : ps.q_vars) {
      double v = sol.scalar_values(qv);
      if (std::min(std::abs(v), std::abs(1.0 - v)) <= 1e-3) ++near;
      ++total;
    }
  res.binariness = total ? static_cast<double>(near) / total : 1.0;
  res.cache.validate(cfg);
  return res;
}

}  // namespace cachebeam
