// Primal-dual path-following solver for the block SDP form in sdp.hpp.
//
// The problem is flattened to
//     min c'y   s.t.   A_eq y = b_eq,   S_k(y) = bias_k + sum_i y_i G_{k,i} >= 0
// where y stacks the upper triangles of the PSD blocks and the scalar
// variables, and every original constraint (PSD-ness of a variable block,
// scalar bound, scalar inequality, LMI) becomes one cone block S_k. Search
// directions use Nesterov-Todd scaling with a Mehrotra predictor-corrector;
// the Schur complement is formed with closed-form trace identities so no
// per-variable gradient matrices are ever materialized.
//
// Infeasibility is never inferred from divergence: when path-following fails
// to certify optimality, a strict-feasibility search (maximize t subject to
// S_k(y) >= t I, t <= 1, |y_i| bounded) decides between Infeasible and
// Inaccurate via the sign of the optimal margin.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cachebeam/sdp.hpp"

namespace cachebeam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int svec_len(int d) { return d * (d + 1) / 2; }

// Index of entry (r, c), r <= c, inside the stacked upper triangle.
int svec_idx(int r, int c) { return c * (c + 1) / 2 + r; }

Eigen::MatrixXd mat_from_svec(const Eigen::VectorXd& y, int off, int d) {
  Eigen::MatrixXd m(d, d);
  for (int c = 0; c < d; ++c)
    for (int r = 0; r <= c; ++r) m(r, c) = m(c, r) = y(off + svec_idx(r, c));
  return m;
}

// out[off + idx(r,c)] += w * <M, E_rc> with E the unnormalized symmetric basis.
void grad_add(Eigen::VectorXd& out, int off, int d, const Eigen::MatrixXd& m, double w) {
  for (int c = 0; c < d; ++c) {
    for (int r = 0; r < c; ++r) out(off + svec_idx(r, c)) += w * (m(r, c) + m(c, r));
    out(off + svec_idx(c, c)) += w * m(c, c);
  }
}

struct MatTerm {
  int vb = 0;        // variable block index
  double coeff = 1;  // S += coeff * P' X P
  Eigen::MatrixXd P;
  bool ident = false;
};

struct ConeM {
  int dim = 0;
  Eigen::MatrixXd bias;
  std::vector<MatTerm> mats;
  std::vector<std::pair<int, Eigen::MatrixXd>> scals;  // (y index, F)
  int src_kind = 0;  // 0 var block, 2 scalar con, 3 lmi
  int src_idx = 0;
  double scale = 1.0;  // S_internal = S_original / scale
};

struct Cone1 {
  double bias = 0.0;
  std::vector<std::pair<int, double>> row;  // sparse gradient
  int src_kind = 0;  // 1 scalar bound, 2 scalar con, 3 lmi(dim1), 4/5 margin aux
  int src_idx = 0;
  double scale = 1.0;
};

struct Internal {
  int n = 0;
  std::vector<int> vb_dim, vb_off;  // variable psd blocks
  int scal_off = 0;                 // start of scalar vars in y
  int n_scal = 0;
  Eigen::VectorXd c;
  double c_scale = 1.0;
  double obj_const = 0.0;
  std::vector<ConeM> cm;
  std::vector<Cone1> c1;
  Eigen::MatrixXd Aeq;  // m_eq x n
  Eigen::VectorXd beq;
  std::vector<int> eq_src;  // scalar-constraint index per eq row
};

// Per-cone iterate state.
struct StateM {
  Eigen::MatrixXd S, Z;
  // NT scaling artifacts, refreshed each iteration.
  Eigen::MatrixXd T, Tinv, K;  // K = W^{-1}
  Eigen::VectorXd lam;
  Eigen::MatrixXd Rs;        // affine residual bias+A(y) - S
  Eigen::MatrixXd Rc;        // complementarity target
  Eigen::MatrixXd dS, dZ;
};

struct State1 {
  double s = 1, z = 1;
  double k = 1;  // 1/w = z-over-s weight used in the Schur complement
  double lam = 1;
  double rs = 0, rc = 0, ds = 0, dz = 0;
};

// ---- building the internal form --------------------------------------------

Internal build_internal(const SdpProblem& p) {
  p.validate();
  Internal in;
  const int nb = static_cast<int>(p.blocks.size());
  in.vb_dim.resize(nb);
  in.vb_off.resize(nb);
  int off = 0;
  for (int b = 0; b < nb; ++b) {
    in.vb_dim[b] = p.blocks[b].dim;
    in.vb_off[b] = off;
    off += svec_len(p.blocks[b].dim);
  }
  in.scal_off = off;
  in.n_scal = static_cast<int>(p.scalars.size());
  in.n = off + in.n_scal;
  if (in.n == 0) throw std::invalid_argument("solve_sdp: problem has no variables");

  in.c = Eigen::VectorXd::Zero(in.n);
  for (int b = 0; b < nb; ++b)
    if (p.obj_blocks[b].size()) grad_add(in.c, in.vb_off[b], in.vb_dim[b], p.obj_blocks[b], 1.0);
  for (int j = 0; j < in.n_scal; ++j) in.c(in.scal_off + j) = p.obj_scalars(j);
  in.obj_const = p.obj_constant;
  in.c_scale = std::max(1.0, in.c.cwiseAbs().maxCoeff());
  in.c /= in.c_scale;

  // Variable blocks are cones themselves.
  for (int b = 0; b < nb; ++b) {
    const int d = in.vb_dim[b];
    if (d == 1) {
      Cone1 c;
      c.bias = 0;
      c.row = {{in.vb_off[b], 1.0}};
      c.src_kind = 0;
      c.src_idx = b;
      in.c1.push_back(std::move(c));
    } else {
      ConeM c;
      c.dim = d;
      c.bias = Eigen::MatrixXd::Zero(d, d);
      c.mats.push_back({b, 1.0, Eigen::MatrixXd(), true});
      c.src_kind = 0;
      c.src_idx = b;
      in.cm.push_back(std::move(c));
    }
  }
  // Scalar lower bounds.
  for (int j = 0; j < in.n_scal; ++j) {
    if (!p.scalars[j].has_lower) continue;
    Cone1 c;
    c.bias = -p.scalars[j].lower;
    c.row = {{in.scal_off + j, 1.0}};
    c.src_kind = 1;
    c.src_idx = j;
    in.c1.push_back(std::move(c));
  }
  // Scalar constraints: LE/GE become 1x1 cones, EQ becomes an equality row.
  std::vector<Eigen::VectorXd> eq_rows;
  std::vector<double> eq_rhs;
  for (std::size_t i = 0; i < p.scalar_constraints.size(); ++i) {
    const auto& sc = p.scalar_constraints[i];
    Eigen::VectorXd row = Eigen::VectorXd::Zero(in.n);
    for (const auto& bc : sc.blocks) grad_add(row, in.vb_off[bc.block], in.vb_dim[bc.block], bc.A, 1.0);
    for (const auto& s : sc.scalars) row(in.scal_off + s.var) += s.a;
    double scale = std::max({1.0, row.cwiseAbs().maxCoeff(), std::abs(sc.rhs)});
    if (sc.rel == SdpProblem::Rel::EQ) {
      eq_rows.push_back(row / scale);
      eq_rhs.push_back(sc.rhs / scale);
      in.eq_src.push_back(static_cast<int>(i));
      continue;
    }
    Cone1 c;
    c.scale = scale;
    c.src_kind = 2;
    c.src_idx = static_cast<int>(i);
    double sgn = (sc.rel == SdpProblem::Rel::LE) ? -1.0 : 1.0;  // S = sgn*(lhs - rhs)
    c.bias = -sgn * sc.rhs / scale;
    for (int k = 0; k < in.n; ++k)
      if (row(k) != 0.0) c.row.push_back({k, sgn * row(k) / scale});
    in.c1.push_back(std::move(c));
  }
  in.Aeq.resize(eq_rows.size(), in.n);
  in.beq.resize(eq_rows.size());
  for (std::size_t r = 0; r < eq_rows.size(); ++r) {
    in.Aeq.row(r) = eq_rows[r];
    in.beq(r) = eq_rhs[r];
  }
  // LMIs: S = rhs - sum terms.
  for (std::size_t i = 0; i < p.lmi_constraints.size(); ++i) {
    const auto& lmi = p.lmi_constraints[i];
    double scale = std::max(1.0, lmi.rhs.norm());
    for (const auto& t : lmi.terms)
      scale = std::max(scale, std::abs(t.coeff) * t.P.squaredNorm());
    for (const auto& t : lmi.scalar_terms) scale = std::max(scale, t.F.norm());
    if (lmi.dim == 1) {
      Cone1 c;
      c.scale = scale;
      c.src_kind = 3;
      c.src_idx = static_cast<int>(i);
      c.bias = lmi.rhs(0, 0) / scale;
      Eigen::VectorXd row = Eigen::VectorXd::Zero(in.n);
      for (const auto& t : lmi.terms) {
        Eigen::MatrixXd a = t.coeff * (t.P * t.P.transpose());
        grad_add(row, in.vb_off[t.block], in.vb_dim[t.block], a, 1.0);
      }
      for (const auto& t : lmi.scalar_terms) row(in.scal_off + t.var) += t.F(0, 0);
      for (int k = 0; k < in.n; ++k)
        if (row(k) != 0.0) c.row.push_back({k, -row(k) / scale});
      in.c1.push_back(std::move(c));
    } else {
      ConeM c;
      c.dim = lmi.dim;
      c.scale = scale;
      c.src_kind = 3;
      c.src_idx = static_cast<int>(i);
      c.bias = lmi.rhs / scale;
      for (const auto& t : lmi.terms) c.mats.push_back({t.block, -t.coeff / scale, t.P, false});
      for (const auto& t : lmi.scalar_terms)
        c.scals.push_back({in.scal_off + t.var, (-1.0 / scale) * t.F});
      in.cm.push_back(std::move(c));
    }
  }
  return in;
}

// ---- cone algebra -----------------------------------------------------------

Eigen::MatrixXd cone_affine(const Internal& in, const ConeM& c, const Eigen::VectorXd& y) {
  Eigen::MatrixXd s = c.bias;
  for (const auto& t : c.mats) {
    Eigen::MatrixXd x = mat_from_svec(y, in.vb_off[t.vb], in.vb_dim[t.vb]);
    if (t.ident)
      s += t.coeff * x;
    else
      s += t.coeff * (t.P.transpose() * x * t.P);
  }
  for (const auto& [j, F] : c.scals) s += y(j) * F;
  return s;
}

double cone_affine1(const Cone1& c, const Eigen::VectorXd& y) {
  double s = c.bias;
  for (const auto& [j, v] : c.row) s += v * y(j);
  return s;
}

// out += adjoint of the cone map applied to Z.
void cone_adjoint(const Internal& in, const ConeM& c, const Eigen::MatrixXd& z,
                  Eigen::VectorXd& out) {
  for (const auto& t : c.mats) {
    if (t.ident) {
      grad_add(out, in.vb_off[t.vb], in.vb_dim[t.vb], z, t.coeff);
    } else {
      Eigen::MatrixXd m = t.P * z * t.P.transpose();
      grad_add(out, in.vb_off[t.vb], in.vb_dim[t.vb], m, t.coeff);
    }
  }
  for (const auto& [j, F] : c.scals) out(j) += F.cwiseProduct(z).sum();
}

// Schur contribution of one matrix cone: H_ij += tr(G_i K G_j K).
void accumulate_schur(const Internal& in, const ConeM& c, const Eigen::MatrixXd& K,
                      Eigen::MatrixXd& H) {
  const int nt = static_cast<int>(c.mats.size());
  // mat x mat
  for (int t1 = 0; t1 < nt; ++t1) {
    const auto& a = c.mats[t1];
    const int d1 = in.vb_dim[a.vb], o1 = in.vb_off[a.vb];
    for (int t2 = t1; t2 < nt; ++t2) {
      const auto& b = c.mats[t2];
      const int d2 = in.vb_dim[b.vb], o2 = in.vb_off[b.vb];
      Eigen::MatrixXd Q;  // P1 K P2'
      if (a.ident && b.ident)
        Q = K;
      else if (a.ident)
        Q = K * b.P.transpose();
      else if (b.ident)
        Q = a.P * K;
      else
        Q = a.P * K * b.P.transpose();
      const double w = a.coeff * b.coeff;
      if (t1 == t2) {
        for (int cc = 0; cc < d1; ++cc)
          for (int rr = 0; rr <= cc; ++rr) {
            const int i = o1 + svec_idx(rr, cc);
            for (int dd = 0; dd < d2; ++dd)
              for (int ss = 0; ss <= dd; ++ss) {
                const int j = o2 + svec_idx(ss, dd);
                if (j < i) continue;
                double v;
                if (rr == cc && ss == dd)
                  v = Q(rr, ss) * Q(rr, ss);
                else if (rr == cc)
                  v = 2.0 * Q(rr, ss) * Q(rr, dd);
                else if (ss == dd)
                  v = 2.0 * Q(rr, ss) * Q(cc, ss);
                else
                  v = 2.0 * (Q(rr, ss) * Q(cc, dd) + Q(rr, dd) * Q(cc, ss));
                H(i, j) += w * v;
                if (i != j) H(j, i) += w * v;
              }
          }
      } else {
        // Covers both (t1,t2) and (t2,t1) orderings.
        for (int cc = 0; cc < d1; ++cc)
          for (int rr = 0; rr <= cc; ++rr) {
            const int i = o1 + svec_idx(rr, cc);
            for (int dd = 0; dd < d2; ++dd)
              for (int ss = 0; ss <= dd; ++ss) {
                const int j = o2 + svec_idx(ss, dd);
                double v;
                if (rr == cc && ss == dd)
                  v = Q(rr, ss) * Q(rr, ss);
                else if (rr == cc)
                  v = 2.0 * Q(rr, ss) * Q(rr, dd);
                else if (ss == dd)
                  v = 2.0 * Q(rr, ss) * Q(cc, ss);
                else
                  v = 2.0 * (Q(rr, ss) * Q(cc, dd) + Q(rr, dd) * Q(cc, ss));
                v *= w;
                H(i, j) += v;
                H(j, i) += v;
              }
          }
      }
    }
    // mat x scalar
    for (const auto& [j, F] : c.scals) {
      Eigen::MatrixXd KFK = K * F * K;
      Eigen::MatrixXd N = a.ident ? KFK : Eigen::MatrixXd(a.P * KFK * a.P.transpose());
      for (int cc = 0; cc < d1; ++cc)
        for (int rr = 0; rr <= cc; ++rr) {
          const int i = o1 + svec_idx(rr, cc);
          double v = a.coeff * ((rr == cc) ? N(rr, rr) : N(rr, cc) + N(cc, rr));
          H(i, j) += v;
          H(j, i) += v;
        }
    }
  }
  // scalar x scalar
  for (std::size_t s1 = 0; s1 < c.scals.size(); ++s1)
    for (std::size_t s2 = s1; s2 < c.scals.size(); ++s2) {
      const auto& [j1, F1] = c.scals[s1];
      const auto& [j2, F2] = c.scals[s2];
      double v = (F1 * K * F2 * K).trace();
      H(j1, j2) += v;
      if (j1 != j2) H(j2, j1) += v;
    }
}

double max_step_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& D) {
  Eigen::LLT<Eigen::MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd M = L.triangularView<Eigen::Lower>().solve(D);
  M = L.triangularView<Eigen::Lower>().solve(M.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()),
                                                    Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues().minCoeff();
  return lmin >= 0 ? kInf : -1.0 / lmin;
}

struct IpmResult {
  bool converged = false;
  Eigen::VectorXd y;
  Eigen::VectorXd nu;
  std::vector<Eigen::MatrixXd> Zm;  // duals of matrix cones
  std::vector<double> Z1;           // duals of 1x1 cones
  double pobj = 0, dobj = 0;
  double pinf = kInf, dinf = kInf, relgap = kInf;
  int iters = 0;
  std::string note;
};

IpmResult run_ipm(const Internal& in, const SolveOptions& opts) {
  const int n = in.n;
  const int meq = static_cast<int>(in.beq.size());
  IpmResult res;

  std::vector<StateM> sm(in.cm.size());
  std::vector<State1> s1(in.c1.size());
  double bias_scale = 1.0;
  for (const auto& c : in.cm) bias_scale = std::max(bias_scale, c.bias.norm());
  for (const auto& c : in.c1) bias_scale = std::max(bias_scale, std::abs(c.bias));
  const double init_s = 10.0 * bias_scale;
  const double init_z = 10.0;
  double ntot = 0;
  for (std::size_t k = 0; k < in.cm.size(); ++k) {
    sm[k].S = init_s * Eigen::MatrixXd::Identity(in.cm[k].dim, in.cm[k].dim);
    sm[k].Z = init_z * Eigen::MatrixXd::Identity(in.cm[k].dim, in.cm[k].dim);
    ntot += in.cm[k].dim;
  }
  for (auto& s : s1) {
    s.s = init_s;
    s.z = init_z;
    ntot += 1;
  }

  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(meq);
  double best_pinf = kInf, best_dinf = kInf, best_gap = kInf;
  int stall = 0;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    res.iters = iter;
    // Residuals.
    for (std::size_t k = 0; k < in.cm.size(); ++k)
      sm[k].Rs = cone_affine(in, in.cm[k], y) - sm[k].S;
    for (std::size_t k = 0; k < in.c1.size(); ++k)
      s1[k].rs = cone_affine1(in.c1[k], y) - s1[k].s;
    Eigen::VectorXd rd = in.c;
    if (meq) rd -= in.Aeq.transpose() * nu;
    for (std::size_t k = 0; k < in.cm.size(); ++k) {
      Eigen::VectorXd tmp = Eigen::VectorXd::Zero(n);
      cone_adjoint(in, in.cm[k], sm[k].Z, tmp);
      rd -= tmp;
    }
    for (std::size_t k = 0; k < in.c1.size(); ++k)
      for (const auto& [j, v] : in.c1[k].row) rd(j) -= v * s1[k].z;
    Eigen::VectorXd req = meq ? Eigen::VectorXd(in.beq - in.Aeq * y) : Eigen::VectorXd();

    double gap = 0;
    for (std::size_t k = 0; k < in.cm.size(); ++k) gap += sm[k].S.cwiseProduct(sm[k].Z).sum();
    for (const auto& s : s1) gap += s.s * s.z;
    double mu = gap / ntot;

    double pobj = in.c.dot(y);
    double dobj = 0;
    for (std::size_t k = 0; k < in.cm.size(); ++k)
      dobj -= in.cm[k].bias.cwiseProduct(sm[k].Z).sum();
    for (std::size_t k = 0; k < in.c1.size(); ++k) dobj -= in.c1[k].bias * s1[k].z;
    if (meq) dobj += in.beq.dot(nu);

    double pinf = 0;
    for (std::size_t k = 0; k < in.cm.size(); ++k)
      pinf = std::max(pinf, sm[k].Rs.norm() / (1.0 + in.cm[k].bias.norm()));
    for (std::size_t k = 0; k < in.c1.size(); ++k)
      pinf = std::max(pinf, std::abs(s1[k].rs) / (1.0 + std::abs(in.c1[k].bias)));
    if (meq) pinf = std::max(pinf, req.cwiseAbs().maxCoeff() / (1.0 + in.beq.cwiseAbs().maxCoeff()));
    double dinf = rd.cwiseAbs().maxCoeff() / (1.0 + in.c.cwiseAbs().maxCoeff());
    double relgap = gap / (1.0 + std::abs(pobj) + std::abs(dobj));

    if (opts.verbose)
      std::fprintf(stderr, "it %3d pobj %+.8e dobj %+.8e pinf %.2e dinf %.2e gap %.2e\n", iter,
                   pobj, dobj, pinf, dinf, relgap);
    // On infeasible or unbounded instances the iterates legitimately blow up
    // (a Farkas ray developing); once anything overflows, stop and report the
    // last finite residuals instead of NaN-poisoned ones.
    if (!std::isfinite(pobj) || !std::isfinite(dobj) || !std::isfinite(pinf) ||
        !std::isfinite(dinf) || !std::isfinite(relgap)) {
      res.note = "diverged";
      break;
    }
    res.pobj = pobj;
    res.dobj = dobj;
    res.pinf = pinf;
    res.dinf = dinf;
    res.relgap = relgap;
    // Snapshot the iterate while it is still finite; if a later step
    // overflows, the caller gets this state rather than NaN garbage.
    res.y = y;
    res.nu = nu;
    res.Zm.assign(sm.size(), Eigen::MatrixXd());
    for (std::size_t k = 0; k < sm.size(); ++k) res.Zm[k] = sm[k].Z;
    res.Z1.assign(s1.size(), 0.0);
    for (std::size_t k = 0; k < s1.size(); ++k) res.Z1[k] = s1[k].z;

    if (pinf <= opts.tol && dinf <= opts.tol && relgap <= opts.tol) {
      res.converged = true;
      break;
    }
    // Stall detection: residuals spike and recover early on, so judge each
    // one against its own best; only when none improves for a long stretch
    // has the iteration truly flatlined.
    bool improved = false;
    if (pinf < best_pinf * 0.9) { best_pinf = pinf; improved = true; }
    if (dinf < best_dinf * 0.9) { best_dinf = dinf; improved = true; }
    if (relgap < best_gap * 0.9) { best_gap = relgap; improved = true; }
    if (improved) {
      stall = 0;
    } else if (++stall > 40) {
      res.note = "stalled";
      break;
    }

    // NT scalings via Cholesky factors and an SVD of Lz' * Ls.  Unlike the
    // S^(1/2) Z S^(1/2) eigen-route this only pays the square root of each
    // cone's condition number, which matters once the iterates approach a
    // degenerate boundary.  With Ls V = U Sigma V' factors,
    //   T = Ls V Sigma^(-1/2)  gives  T' Z T = Tinv S Tinv' = Sigma.
    bool numeric_fail = false;
    auto chol_factor = [](const Eigen::MatrixXd& A, Eigen::MatrixXd& L) {
      Eigen::LDLT<Eigen::MatrixXd> ld(A);
      if (ld.info() != Eigen::Success) return false;
      Eigen::VectorXd d = ld.vectorD();
      double dmax = std::max(d.maxCoeff(), 1e-300);
      d = d.cwiseMax(1e-16 * dmax);
      L = ld.transpositionsP().transpose() *
          (Eigen::MatrixXd(ld.matrixL()) * d.cwiseSqrt().asDiagonal());
      return true;
    };
    for (std::size_t k = 0; k < in.cm.size(); ++k) {
      auto& st = sm[k];
      Eigen::MatrixXd Ls, Lz;
      if (!chol_factor(st.S, Ls) || !chol_factor(st.Z, Lz)) { numeric_fail = true; break; }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(Lz.transpose() * Ls,
                                            Eigen::ComputeFullU | Eigen::ComputeFullV);
      Eigen::VectorXd sig = svd.singularValues();
      double smax = std::max(sig.maxCoeff(), 1e-300);
      sig = sig.cwiseMax(1e-15 * smax);
      Eigen::VectorXd shalf = sig.cwiseSqrt();
      st.lam = sig;
      st.T = Ls * svd.matrixV() * shalf.cwiseInverse().asDiagonal();
      st.Tinv = shalf.asDiagonal() * svd.matrixV().transpose() *
                Ls.inverse();
      st.K = st.Tinv.transpose() * st.Tinv;
    }
    if (numeric_fail) {
      res.note = "cone factorization failed";
      break;
    }
    for (auto& s : s1) {
      s.k = s.z / s.s;
      s.lam = std::sqrt(s.s * s.z);
    }

    // Schur complement.
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < in.cm.size(); ++k) accumulate_schur(in, in.cm[k], sm[k].K, H);
    for (std::size_t k = 0; k < in.c1.size(); ++k) {
      const auto& row = in.c1[k].row;
      for (const auto& [i, vi] : row)
        for (const auto& [j, vj] : row) H(i, j) += s1[k].k * vi * vj;
    }
    // The Schur matrix condition number grows like 1/mu and its diagonal
    // spread tracks the variable scales, so equilibrate (Jacobi), factor the
    // balanced matrix semidefinite-safely, and iteratively refine against the
    // exact H; without this the direction error keeps the dual residual from
    // converging past ~1e-5 on badly scaled cones.
    Eigen::VectorXd dsc = H.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd Hs = dsc.asDiagonal() * H * dsc.asDiagonal();
    Hs.diagonal().array() += 1e-14;
    Eigen::LDLT<Eigen::MatrixXd> hfac(Hs);
    if (hfac.info() != Eigen::Success) {
      res.note = "Schur factorization failed";
      break;
    }
    auto base_solve = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd {
      return dsc.asDiagonal() * hfac.solve(dsc.asDiagonal() * b);
    };
    auto refined_solve = [&](const Eigen::VectorXd& b) {
      Eigen::VectorXd x = base_solve(b);
      for (int pass = 0; pass < 3; ++pass) {
        Eigen::VectorXd resid = b - H * x;
        x += base_solve(resid);
      }
      return x;
    };

    // A*(W^{-1} Rs W^{-1}) is shared by predictor and corrector.
    Eigen::VectorXd aw = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < in.cm.size(); ++k) {
      auto& st = sm[k];
      Eigen::MatrixXd m = st.Tinv.transpose() * (st.Tinv * st.Rs * st.Tinv.transpose()) * st.Tinv;
      cone_adjoint(in, in.cm[k], m, aw);
    }
    for (std::size_t k = 0; k < in.c1.size(); ++k)
      for (const auto& [j, v] : in.c1[k].row) aw(j) += v * s1[k].k * s1[k].rs;

    auto solve_kkt = [&](const Eigen::VectorXd& g, Eigen::VectorXd& dy, Eigen::VectorXd& dnu) {
      if (!meq) {
        dy = refined_solve(-g);
        return;
      }
      Eigen::MatrixXd HiA = dsc.asDiagonal() * hfac.solve(dsc.asDiagonal() * in.Aeq.transpose());
      HiA += dsc.asDiagonal() *
             hfac.solve(dsc.asDiagonal() * (in.Aeq.transpose() - H * HiA));
      Eigen::VectorXd Hig = refined_solve(g);
      Eigen::MatrixXd Sc = in.Aeq * HiA;
      Sc.diagonal().array() += 1e-12 * (1.0 + Sc.diagonal().cwiseAbs().maxCoeff());
      Eigen::LLT<Eigen::MatrixXd> sf(Sc);
      dnu = sf.solve(req + in.Aeq * Hig);
      dy = HiA * dnu - Hig;
    };

    auto compute_direction = [&](bool corrector, double sigma_mu) {
      // Eliminating dZ from the Newton system leaves
      //   H dy = A*(Rc) - A*(W^-1 Rs W^-1) - rd,
      // so the primal-residual term enters with a plus sign in g = -(rhs).
      Eigen::VectorXd g = rd + aw;  // minus A*(Rc) added below
      for (std::size_t k = 0; k < in.cm.size(); ++k) {
        auto& st = sm[k];
        if (!corrector) {
          st.Rc = -st.Z;
        } else {
          Eigen::MatrixXd dsh = st.Tinv * st.dS * st.Tinv.transpose();
          Eigen::MatrixXd dzh = st.T.transpose() * st.dZ * st.T;
          Eigen::MatrixXd prod = dsh * dzh;
          Eigen::MatrixXd Dhat(in.cm[k].dim, in.cm[k].dim);
          for (int i = 0; i < in.cm[k].dim; ++i)
            for (int j = 0; j < in.cm[k].dim; ++j) {
              double num = (i == j ? sigma_mu - st.lam(i) * st.lam(i) : 0.0) -
                           0.5 * (prod(i, j) + prod(j, i));
              Dhat(i, j) = num / (0.5 * (st.lam(i) + st.lam(j)));
            }
          st.Rc = st.Tinv.transpose() * Dhat * st.Tinv;
        }
        Eigen::VectorXd tmp = Eigen::VectorXd::Zero(n);
        cone_adjoint(in, in.cm[k], st.Rc, tmp);
        g -= tmp;
      }
      for (std::size_t k = 0; k < in.c1.size(); ++k) {
        auto& s = s1[k];
        s.rc = corrector ? (sigma_mu - s.s * s.z - s.ds * s.dz) / s.s : -s.z;
        for (const auto& [j, v] : in.c1[k].row) g(j) -= v * s.rc;
      }
      Eigen::VectorXd dy, dnu;
      solve_kkt(g, dy, dnu);
      for (std::size_t k = 0; k < in.cm.size(); ++k) {
        auto& st = sm[k];
        Eigen::MatrixXd ady = Eigen::MatrixXd::Zero(in.cm[k].dim, in.cm[k].dim);
        const auto& cone = in.cm[k];
        for (const auto& t : cone.mats) {
          Eigen::MatrixXd x = mat_from_svec(dy, in.vb_off[t.vb], in.vb_dim[t.vb]);
          if (t.ident)
            ady += t.coeff * x;
          else
            ady += t.coeff * (t.P.transpose() * x * t.P);
        }
        for (const auto& [j, F] : cone.scals) ady += dy(j) * F;
        st.dS = ady + st.Rs;
        st.dZ = st.Rc - st.Tinv.transpose() * (st.Tinv * st.dS * st.Tinv.transpose()) * st.Tinv;
      }
      for (std::size_t k = 0; k < in.c1.size(); ++k) {
        auto& s = s1[k];
        double ady = 0;
        for (const auto& [j, v] : in.c1[k].row) ady += v * dy(j);
        s.ds = ady + s.rs;
        s.dz = s.rc - s.k * s.ds;
      }
      return std::make_pair(dy, dnu);
    };

    auto step_lengths = [&]() {
      double ap = kInf, ad = kInf;
      for (auto& st : sm) {
        ap = std::min(ap, max_step_matrix(st.S, st.dS));
        ad = std::min(ad, max_step_matrix(st.Z, st.dZ));
      }
      for (auto& s : s1) {
        if (s.ds < 0) ap = std::min(ap, -s.s / s.ds);
        if (s.dz < 0) ad = std::min(ad, -s.z / s.dz);
      }
      return std::make_pair(ap, ad);
    };

    // Predictor.
    compute_direction(false, 0.0);
    auto [ap_aff, ad_aff] = step_lengths();
    double a_p = std::min(1.0, ap_aff), a_d = std::min(1.0, ad_aff);
    double gap_aff = 0;
    for (auto& st : sm)
      gap_aff += (st.S + a_p * st.dS).cwiseProduct(st.Z + a_d * st.dZ).sum();
    for (auto& s : s1) gap_aff += (s.s + a_p * s.ds) * (s.z + a_d * s.dz);
    double mu_aff = std::max(gap_aff, 0.0) / ntot;
    double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);
    sigma = std::min(std::max(sigma, 1e-8), 1.0 - 1e-8);
    // Balanced progress: Mehrotra's sigma only looks at complementarity, so
    // near degenerate boundaries it can crash mu orders of magnitude below a
    // still-unconverged dual residual, after which the scalings are too
    // ill-conditioned for the dual to recover.  Hold mu up until the dual
    // residual has caught up with the gap.
    if (relgap < 1e-4 && dinf > 5.0 * relgap && dinf > opts.tol) sigma = std::max(sigma, 0.5);
    // When progress flatlines the iterate has usually drifted off the central
    // path (scrambled S.Z spectrum in a near-degenerate cone); force heavy
    // centering to restore the pairing before pushing mu further down.
    if (stall >= 8) sigma = std::max(sigma, 0.9);

    // Corrector (second-order terms use the predictor direction in dS/dZ).
    auto [dy, dnu] = compute_direction(true, sigma * mu);
    auto [ap, ad] = step_lengths();
    const double tau = 0.98;
    a_p = std::min(1.0, tau * ap);
    a_d = std::min(1.0, tau * ad);
    if (a_p < 1e-10 && a_d < 1e-10) {
      res.note = "step collapsed";
      break;
    }
    y += a_p * dy;
    if (meq) nu += a_d * dnu;
    for (auto& st : sm) {
      st.S += a_p * st.dS;
      st.Z += a_d * st.dZ;
    }
    for (auto& s : s1) {
      s.s += a_p * s.ds;
      s.z += a_d * s.dz;
    }
  }

  if (res.y.size() != n) {
    // Never completed a finite iteration; return the start point.
    res.y = Eigen::VectorXd::Zero(n);
    res.nu = Eigen::VectorXd::Zero(meq);
    res.Zm.assign(sm.size(), Eigen::MatrixXd());
    for (std::size_t k = 0; k < sm.size(); ++k)
      res.Zm[k] = init_z * Eigen::MatrixXd::Identity(in.cm[k].dim, in.cm[k].dim);
    res.Z1.assign(s1.size(), init_z);
  }
  return res;
}

// Strict-feasibility search: max t s.t. cones(y) >= t I, t <= 1, |y| <= box.
Internal build_margin(const Internal& in) {
  Internal m = in;
  const int t_idx = m.n;
  m.n += 1;
  m.c = Eigen::VectorXd::Zero(m.n);
  m.c(t_idx) = -1.0;  // maximize t
  m.c_scale = 1.0;
  m.obj_const = 0.0;
  if (m.Aeq.size()) {
    m.Aeq.conservativeResize(Eigen::NoChange, m.n);
    m.Aeq.col(t_idx).setZero();
  }
  for (auto& c : m.cm) {
    c.scals.push_back({t_idx, -Eigen::MatrixXd::Identity(c.dim, c.dim)});
  }
  for (auto& c : m.c1) c.row.push_back({t_idx, -1.0});
  Cone1 cap;
  cap.bias = 1.0;
  cap.row = {{t_idx, -1.0}};
  cap.src_kind = 4;
  m.c1.push_back(cap);
  double box = 1e7;
  for (int i = 0; i < in.n; ++i) {
    Cone1 lo, hi;
    lo.bias = box;
    lo.row = {{i, 1.0}};
    lo.src_kind = 5;
    hi.bias = box;
    hi.row = {{i, -1.0}};
    hi.src_kind = 5;
    m.c1.push_back(lo);
    m.c1.push_back(hi);
  }
  return m;
}

// Worst relative violation of the *original* constraints at a candidate point.
double primal_violation(const SdpProblem& p, const std::vector<Eigen::MatrixXd>& X,
                        const Eigen::VectorXd& s) {
  double v = 0;
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X[b], Eigen::EigenvaluesOnly);
    v = std::max(v, -es.eigenvalues().minCoeff() / (1.0 + X[b].norm()));
  }
  for (std::size_t j = 0; j < p.scalars.size(); ++j)
    if (p.scalars[j].has_lower)
      v = std::max(v, (p.scalars[j].lower - s(j)) / (1.0 + std::abs(p.scalars[j].lower)));
  for (const auto& sc : p.scalar_constraints) {
    double lhs = 0;
    for (const auto& bc : sc.blocks) lhs += bc.A.cwiseProduct(X[bc.block]).sum();
    for (const auto& t : sc.scalars) lhs += t.a * s(t.var);
    double scale = 1.0 + std::abs(sc.rhs);
    if (sc.rel == SdpProblem::Rel::LE)
      v = std::max(v, (lhs - sc.rhs) / scale);
    else if (sc.rel == SdpProblem::Rel::GE)
      v = std::max(v, (sc.rhs - lhs) / scale);
    else
      v = std::max(v, std::abs(lhs - sc.rhs) / scale);
  }
  for (const auto& lmi : p.lmi_constraints) {
    Eigen::MatrixXd m = -lmi.rhs;
    for (const auto& t : lmi.terms) m += t.coeff * (t.P.transpose() * X[t.block] * t.P);
    for (const auto& t : lmi.scalar_terms) m += s(t.var) * t.F;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()),
                                                      Eigen::EigenvaluesOnly);
    v = std::max(v, es.eigenvalues().maxCoeff() / (1.0 + lmi.rhs.norm()));
  }
  return v;
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& prob, const SolveOptions& opts) {
  Internal in = build_internal(prob);
  IpmResult r = run_ipm(in, opts);

  SdpSolution sol;
  sol.iterations = r.iters;
  const int nb = static_cast<int>(prob.blocks.size());
  sol.block_values.resize(nb);
  for (int b = 0; b < nb; ++b) {
    sol.block_values[b] = mat_from_svec(r.y, in.vb_off[b], in.vb_dim[b]);
  }
  sol.scalar_values.resize(in.n_scal);
  for (int j = 0; j < in.n_scal; ++j) sol.scalar_values(j) = r.y(in.scal_off + j);
  sol.objective = r.pobj * in.c_scale + in.obj_const;
  sol.dual_infeasibility = r.dinf;
  sol.duality_gap = std::abs(r.pobj - r.dobj) / (1.0 + std::abs(r.pobj) + std::abs(r.dobj));
  sol.primal_infeasibility = primal_violation(prob, sol.block_values, sol.scalar_values);

  if (r.converged) {
    sol.status = SdpStatus::Optimal;
    sol.message = "converged in " + std::to_string(r.iters) + " iterations";
    // Map duals back to the original constraint lists (undo scalings).
    sol.has_duals = true;
    sol.psd_duals.assign(nb, Eigen::MatrixXd());
    sol.scalar_lb_duals = Eigen::VectorXd::Zero(in.n_scal);
    sol.scalar_con_duals = Eigen::VectorXd::Zero(prob.scalar_constraints.size());
    sol.lmi_duals.assign(prob.lmi_constraints.size(), Eigen::MatrixXd());
    for (std::size_t k = 0; k < in.cm.size(); ++k) {
      const auto& c = in.cm[k];
      Eigen::MatrixXd Z = (in.c_scale / c.scale) * r.Zm[k];
      if (c.src_kind == 0)
        sol.psd_duals[c.src_idx] = Z;
      else if (c.src_kind == 3)
        sol.lmi_duals[c.src_idx] = Z;
    }
    for (std::size_t k = 0; k < in.c1.size(); ++k) {
      const auto& c = in.c1[k];
      double z = (in.c_scale / c.scale) * r.Z1[k];
      if (c.src_kind == 0)
        sol.psd_duals[c.src_idx] = Eigen::MatrixXd::Constant(1, 1, z);
      else if (c.src_kind == 1)
        sol.scalar_lb_duals(c.src_idx) = z;
      else if (c.src_kind == 2)
        sol.scalar_con_duals(c.src_idx) = z;
      else if (c.src_kind == 3)
        sol.lmi_duals[c.src_idx] = Eigen::MatrixXd::Constant(1, 1, z);
    }
    for (std::size_t e = 0; e < in.eq_src.size(); ++e)
      sol.scalar_con_duals(in.eq_src[e]) = in.c_scale * r.nu(e);
    // Unbounded-below guard (objective runs away while staying feasible).
    if (sol.objective < -1e12) {
      sol.status = SdpStatus::Unbounded;
      sol.message = "objective unbounded below";
    }
    return sol;
  }

  // A primal-feasible iterate rules out infeasibility, so the margin
  // certificate below would waste iterations to prove nothing.  A diverged
  // run is excluded: its feasibility question is exactly what the
  // certificate settles.
  if (!opts.certify_infeasibility ||
      (r.note != "diverged" && sol.primal_infeasibility <= opts.tol)) {
    sol.status = SdpStatus::Inaccurate;
    sol.message = "path-following did not converge (" + r.note + ")";
    return sol;
  }

  // Inconsistent equalities already certify infeasibility.
  if (in.beq.size()) {
    Eigen::VectorXd ls = in.Aeq.colPivHouseholderQr().solve(in.beq);
    double resid = (in.Aeq * ls - in.beq).norm();
    if (resid > 1e-8 * (1.0 + in.beq.norm())) {
      sol.status = SdpStatus::Infeasible;
      sol.feas_margin = -resid;
      sol.message = "equality constraints are inconsistent";
      return sol;
    }
  }

  Internal margin = build_margin(in);
  SolveOptions mo = opts;
  mo.max_iters = std::max(opts.max_iters, 100);
  IpmResult mr = run_ipm(margin, mo);
  double t_star = -mr.pobj;
  sol.feas_margin = t_star;
  if (mr.converged && t_star < -opts.tol) {
    sol.status = SdpStatus::Infeasible;
    sol.message = "strict feasibility margin " + std::to_string(t_star);
  } else {
    sol.status = SdpStatus::Inaccurate;
    sol.message = "path-following did not converge (" + r.note + "); margin " +
                  (mr.converged ? std::to_string(t_star) : std::string("unresolved"));
  }
  return sol;
}

KktReport check_kkt(const SdpProblem& prob, const SdpSolution& sol) {
  KktReport rep;
  rep.primal_residual = primal_violation(prob, sol.block_values, sol.scalar_values);
  rep.has_duals = sol.has_duals;
  if (!sol.has_duals) return rep;

  const int nb = static_cast<int>(prob.blocks.size());
  // Stationarity: C_b + sum_scon sgn*z*A + sum_lmi coeff * P Z P' - Zpsd = 0,
  // with sgn = +1 for LE, -1 for GE/EQ rows.
  double dres = 0;
  double cnorm = 1.0;
  for (int b = 0; b < nb; ++b)
    if (prob.obj_blocks[b].size()) cnorm = std::max(cnorm, prob.obj_blocks[b].norm());
  if (prob.obj_scalars.size()) cnorm = std::max(cnorm, prob.obj_scalars.cwiseAbs().maxCoeff());

  std::vector<Eigen::MatrixXd> station(nb);
  for (int b = 0; b < nb; ++b)
    station[b] = prob.obj_blocks[b].size()
                     ? Eigen::MatrixXd(prob.obj_blocks[b])
                     : Eigen::MatrixXd::Zero(prob.blocks[b].dim, prob.blocks[b].dim);
  Eigen::VectorXd station_s = prob.obj_scalars;

  for (std::size_t i = 0; i < prob.scalar_constraints.size(); ++i) {
    const auto& sc = prob.scalar_constraints[i];
    double z = sol.scalar_con_duals(i);
    double sgn = (sc.rel == SdpProblem::Rel::LE) ? 1.0 : -1.0;
    for (const auto& bc : sc.blocks) station[bc.block] += sgn * z * bc.A;
    for (const auto& t : sc.scalars) station_s(t.var) += sgn * z * t.a;
  }
  for (std::size_t i = 0; i < prob.lmi_constraints.size(); ++i) {
    const auto& lmi = prob.lmi_constraints[i];
    const Eigen::MatrixXd& Z = sol.lmi_duals[i];
    for (const auto& t : lmi.terms) station[t.block] += t.coeff * (t.P * Z * t.P.transpose());
    for (const auto& t : lmi.scalar_terms) station_s(t.var) += t.F.cwiseProduct(Z).sum();
  }
  for (int b = 0; b < nb; ++b) {
    station[b] -= sol.psd_duals[b];
    dres = std::max(dres, station[b].norm() / cnorm);
  }
  for (std::size_t j = 0; j < prob.scalars.size(); ++j) {
    double r = station_s(j);
    if (prob.scalars[j].has_lower) r -= sol.scalar_lb_duals(j);
    dres = std::max(dres, std::abs(r) / cnorm);
  }
  rep.dual_residual = dres;

  double comp = 0;
  for (int b = 0; b < nb; ++b) {
    double v = sol.psd_duals[b].cwiseProduct(sol.block_values[b]).sum();
    comp = std::max(comp, std::abs(v) /
                              (1.0 + sol.block_values[b].norm() * sol.psd_duals[b].norm()));
  }
  for (std::size_t j = 0; j < prob.scalars.size(); ++j)
    if (prob.scalars[j].has_lower) {
      double slack = sol.scalar_values(j) - prob.scalars[j].lower;
      comp = std::max(comp, std::abs(slack * sol.scalar_lb_duals(j)) /
                                (1.0 + std::abs(sol.scalar_values(j))));
    }
  for (std::size_t i = 0; i < prob.scalar_constraints.size(); ++i) {
    const auto& sc = prob.scalar_constraints[i];
    if (sc.rel == SdpProblem::Rel::EQ) continue;
    double lhs = 0;
    for (const auto& bc : sc.blocks) lhs += bc.A.cwiseProduct(sol.block_values[bc.block]).sum();
    for (const auto& t : sc.scalars) lhs += t.a * sol.scalar_values(t.var);
    comp = std::max(comp, std::abs((sc.rhs - lhs) * sol.scalar_con_duals(i)) /
                              (1.0 + std::abs(sc.rhs)));
  }
  for (std::size_t i = 0; i < prob.lmi_constraints.size(); ++i) {
    const auto& lmi = prob.lmi_constraints[i];
    Eigen::MatrixXd slack = lmi.rhs;
    for (const auto& t : lmi.terms)
      slack -= t.coeff * (t.P.transpose() * sol.block_values[t.block] * t.P);
    for (const auto& t : lmi.scalar_terms) slack -= sol.scalar_values(t.var) * t.F;
    double v = slack.cwiseProduct(sol.lmi_duals[i]).sum();
    comp = std::max(comp, std::abs(v) / (1.0 + slack.norm() * sol.lmi_duals[i].norm()));
  }
  rep.complementarity = comp;

  // Dual objective from the exported multipliers.
  double dobj = prob.obj_constant;
  for (std::size_t i = 0; i < prob.scalar_constraints.size(); ++i) {
    const auto& sc = prob.scalar_constraints[i];
    double sgn = (sc.rel == SdpProblem::Rel::LE) ? -1.0 : 1.0;
    dobj += sgn * sol.scalar_con_duals(i) * sc.rhs;
  }
  for (std::size_t i = 0; i < prob.lmi_constraints.size(); ++i)
    dobj -= sol.lmi_duals[i].cwiseProduct(prob.lmi_constraints[i].rhs).sum();
  for (std::size_t j = 0; j < prob.scalars.size(); ++j)
    if (prob.scalars[j].has_lower) dobj += sol.scalar_lb_duals(j) * prob.scalars[j].lower;
  rep.duality_gap =
      std::abs(sol.objective - dobj) / (1.0 + std::abs(sol.objective) + std::abs(dobj));
  return rep;
}

}  // namespace cachebeam
