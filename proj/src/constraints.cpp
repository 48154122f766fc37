#include "cachebeam/constraints.hpp"

#include <stdexcept>

namespace cachebeam {

ConstraintSet ConstraintSet::from_scenario(const SystemConfig& cfg, const Scenario& sc) {
  ConstraintSet set;
  set.n = cfg.num_bs * cfg.antennas_per_bs;
  set.num_bs = cfg.num_bs;
  set.num_lr = cfg.num_lr;
  set.er_antennas = cfg.er_antennas;
  set.max_tx_power_w = cfg.max_tx_power_w;
  set.sinr_target = cfg.sinr_target();
  set.secrecy_kappa = cfg.secrecy_kappa_tol();  // unit ER noise folds sigma_e^2 in
  set.an_weight = set.secrecy_kappa;            // kappa_tol / sigma_e^2, sigma_e^2 = 1
  set.csi_radius = sc.eps;
  if (set.sinr_target <= 0.0)
    throw std::invalid_argument("SINR target must be positive (qos_rate_bps too small)");

  set.channel_outer.reserve(sc.lr_channels.size());
  for (const auto& h : sc.lr_channels) set.channel_outer.push_back(h * h.adjoint());
  set.bs_selector.reserve(set.num_bs);
  for (int m = 0; m < set.num_bs; ++m) {
    Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(set.n, set.n);
    for (int a = 0; a < cfg.antennas_per_bs; ++a) lam(m * cfg.antennas_per_bs + a,
                                                      m * cfg.antennas_per_bs + a) = 1.0;
    set.bs_selector.push_back(lam);
  }
  set.er_estimate = sc.er_est;
  set.robust_stack.resize(set.n, set.er_antennas + set.n);
  set.robust_stack.leftCols(set.er_antennas) = sc.er_est;
  set.robust_stack.rightCols(set.n) =
      Eigen::MatrixXcd::Identity(set.n, set.n);
  set.stream_files.reserve(sc.requests.size());
  for (const auto& r : sc.requests) set.stream_files.push_back(r.file);
  return set;
}

void add_power_constraints(SdpProblem& prob, const DeliveryLayout& layout,
                           const ConstraintSet& set) {
  for (int m = 0; m < set.num_bs; ++m) {
    SdpProblem::ScalarConstraint con;
    con.name = "pow_m" + std::to_string(m);
    Eigen::MatrixXd coef = embed_herm_coeff(set.bs_selector[m]);
    for (int w : layout.w_blocks) con.blocks.push_back({w, coef});
    con.blocks.push_back({layout.v_block, coef});
    con.rel = SdpProblem::Rel::LE;
    con.rhs = set.max_tx_power_w;
    prob.add_scalar_constraint(std::move(con));
  }
}

void add_sinr_constraints(SdpProblem& prob, const DeliveryLayout& layout,
                          const ConstraintSet& set) {
  const int k = static_cast<int>(layout.w_blocks.size());
  for (int rho = 0; rho < k; ++rho) {
    SdpProblem::ScalarConstraint con;
    con.name = "sinr_" + std::to_string(rho);
    Eigen::MatrixXd coef = embed_herm_coeff(set.channel_outer[rho]);
    for (int other = 0; other < k; ++other) {
      if (other == rho)
        con.blocks.push_back({layout.w_blocks[other], coef / set.sinr_target});
      else
        con.blocks.push_back({layout.w_blocks[other], -coef});
    }
    con.blocks.push_back({layout.v_block, -coef});
    con.rel = SdpProblem::Rel::GE;
    con.rhs = 1.0;  // unit noise power
    prob.add_scalar_constraint(std::move(con));
  }
}

void add_bigm_constraints(SdpProblem& prob, const DeliveryLayout& layout,
                          const ConstraintSet& set, const Eigen::MatrixXd& q) {
  const int k = static_cast<int>(layout.w_blocks.size());
  if (q.rows() != k || q.cols() != set.num_bs)
    throw std::invalid_argument("cooperation flags must be num_lr x num_bs");
  for (int rho = 0; rho < k; ++rho)
    for (int m = 0; m < set.num_bs; ++m) {
      SdpProblem::ScalarConstraint con;
      con.name = "bigm_r" + std::to_string(rho) + "_m" + std::to_string(m);
      con.blocks.push_back({layout.w_blocks[rho], embed_herm_coeff(set.bs_selector[m])});
      con.rel = SdpProblem::Rel::LE;
      con.rhs = q(rho, m) * set.max_tx_power_w;
      prob.add_scalar_constraint(std::move(con));
    }
}

void add_robust_secrecy(SdpProblem& prob, DeliveryLayout& layout, const ConstraintSet& set) {
  if (set.csi_radius <= 0.0)
    throw std::invalid_argument("robust secrecy needs a positive CSI error radius");
  const int ne = set.er_antennas, n = set.n;
  // The S-procedure matrix is passed to the solver under the congruence
  // diag(I_ne, eps*I_n): the identity columns of the stack pick up a factor
  // eps and the slack coefficient diag(I, -I/eps^2) collapses to diag(I, -I).
  // The feasible set and the slack value are unchanged, but the constraint
  // data stays within a few orders of magnitude of the channel norm instead
  // of spanning 1/eps^2, which the path-following solver needs to converge.
  Eigen::MatrixXcd scaled_stack = set.robust_stack;
  scaled_stack.rightCols(n) *= set.csi_radius;
  const Eigen::MatrixXd ue = embed_complex(scaled_stack);  // 2n x 2(ne+n)
  Eigen::VectorXcd diag_entries(ne + n);
  diag_entries.head(ne).setConstant(1.0);
  diag_entries.tail(n).setConstant(-1.0);
  Eigen::MatrixXcd f = diag_entries.asDiagonal();
  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(ne + n, ne + n);
  rhs.topLeftCorner(ne, ne) = set.secrecy_kappa * Eigen::MatrixXcd::Identity(ne, ne);

  layout.delta_w.clear();
  const int k = static_cast<int>(layout.w_blocks.size());
  for (int rho = 0; rho < k; ++rho) {
    int dv = prob.add_scalar("delta_" + std::to_string(rho), 0.0);
    layout.delta_w.push_back(dv);
    SdpProblem::LmiConstraint lmi;
    lmi.name = "sec_" + std::to_string(rho);
    lmi.dim = 2 * (ne + n);
    lmi.terms.push_back({layout.w_blocks[rho], 1.0, ue});
    lmi.terms.push_back({layout.v_block, -set.an_weight, ue});
    lmi.scalar_terms.push_back({dv, embed_complex(f)});
    lmi.rhs = embed_complex(rhs);
    prob.add_lmi_constraint(std::move(lmi));
  }
}

void add_perfect_secrecy(SdpProblem& prob, const DeliveryLayout& layout,
                         const ConstraintSet& set, const Eigen::MatrixXcd& g) {
  const int ne = static_cast<int>(g.cols());
  const Eigen::MatrixXd ge = embed_complex(g);
  const int k = static_cast<int>(layout.w_blocks.size());
  for (int rho = 0; rho < k; ++rho) {
    SdpProblem::LmiConstraint lmi;
    lmi.name = "sec_" + std::to_string(rho);
    lmi.dim = 2 * ne;
    lmi.terms.push_back({layout.w_blocks[rho], 1.0, ge});
    lmi.terms.push_back({layout.v_block, -set.an_weight, ge});
    lmi.rhs = set.secrecy_kappa * Eigen::MatrixXd::Identity(2 * ne, 2 * ne);
    prob.add_lmi_constraint(std::move(lmi));
  }
}

SdpProblem assemble_delivery(const ConstraintSet& set, const Eigen::MatrixXd& q,
                             SecrecyMode mode, DeliveryLayout& layout,
                             const Eigen::MatrixXcd* perfect_g) {
  SdpProblem prob;
  layout = DeliveryLayout{};
  const int k = set.num_lr;
  const int dim = 2 * set.n;
  for (int rho = 0; rho < k; ++rho) {
    int b = prob.add_psd_block("W" + std::to_string(rho), dim);
    prob.set_block_objective(b, 0.5 * Eigen::MatrixXd::Identity(dim, dim));
    layout.w_blocks.push_back(b);
  }
  layout.v_block = prob.add_psd_block("V", dim);
  prob.set_block_objective(layout.v_block, 0.5 * Eigen::MatrixXd::Identity(dim, dim));

  add_bigm_constraints(prob, layout, set, q);
  add_power_constraints(prob, layout, set);
  add_sinr_constraints(prob, layout, set);
  if (mode == SecrecyMode::Robust) {
    add_robust_secrecy(prob, layout, set);
  } else {
    add_perfect_secrecy(prob, layout, set, perfect_g ? *perfect_g : set.er_estimate);
  }
  return prob;
}

DeliveryVars unpack_delivery(const ConstraintSet& set, const DeliveryLayout& layout,
                             const SdpSolution& sol) {
  DeliveryVars v;
  v.W.reserve(layout.w_blocks.size());
  for (int b : layout.w_blocks) v.W.push_back(unembed_hermitian(sol.block_values[b]));
  v.V = unembed_hermitian(sol.block_values[layout.v_block]);
  v.delta.resize(layout.delta_w.size());
  for (std::size_t i = 0; i < layout.delta_w.size(); ++i)
    v.delta(i) = sol.scalar_values(layout.delta_w[i]);
  (void)set;
  return v;
}

}  // namespace cachebeam
