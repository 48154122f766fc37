#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace cachebeam {

// Linear SDP over a product of real symmetric PSD blocks and bounded scalars:
//
//   minimize    sum_b <C_b, X_b> + c' s + const
//   subject to  sum_b <A_b, X_b> + a' s  (<= | >= | ==)  rhs        (scalar rows)
//               sum_t coeff_t * P_t' X_{b(t)} P_t + sum_j s_j F_j <= RHS   (LMIs)
//               X_b PSD, s_j >= lower_j (optional)
//
// Complex Hermitian data enters through the real embedding helpers below; the
// solver itself only ever sees real symmetric blocks.
struct SdpProblem {
  enum class Rel { LE, GE, EQ };

  struct PsdBlock {
    std::string name;
    int dim = 0;
  };
  struct ScalarVar {
    std::string name;
    double lower = 0.0;
    bool has_lower = true;
  };
  struct BlockCoeff {
    int block = 0;
    Eigen::MatrixXd A;  // symmetric, dim x dim
  };
  struct ScalarCoeff {
    int var = 0;
    double a = 0.0;
  };
  struct ScalarConstraint {
    std::string name;
    std::vector<BlockCoeff> blocks;
    std::vector<ScalarCoeff> scalars;
    Rel rel = Rel::LE;
    double rhs = 0.0;
  };
  struct LmiTerm {
    int block = 0;
    double coeff = 1.0;
    Eigen::MatrixXd P;  // block_dim x lmi_dim
  };
  struct LmiScalarTerm {
    int var = 0;
    Eigen::MatrixXd F;  // symmetric, lmi_dim x lmi_dim
  };
  struct LmiConstraint {
    std::string name;
    int dim = 0;
    std::vector<LmiTerm> terms;
    std::vector<LmiScalarTerm> scalar_terms;
    Eigen::MatrixXd rhs;  // symmetric, dim x dim
  };

  std::vector<PsdBlock> blocks;
  std::vector<ScalarVar> scalars;
  std::vector<Eigen::MatrixXd> obj_blocks;  // aligned with blocks; empty => zero
  Eigen::VectorXd obj_scalars;              // aligned with scalars
  double obj_constant = 0.0;
  std::vector<ScalarConstraint> scalar_constraints;
  std::vector<LmiConstraint> lmi_constraints;

  int add_psd_block(const std::string& name, int dim);
  int add_scalar(const std::string& name, double lower);
  int add_free_scalar(const std::string& name);
  void set_block_objective(int block, const Eigen::MatrixXd& C);
  void set_scalar_objective(int var, double c);
  int add_scalar_constraint(ScalarConstraint con);
  int add_lmi_constraint(LmiConstraint con);

  // Shape/symmetry checks; throws std::invalid_argument on violations.
  void validate() const;

  // Text fixture round-trip (hex floats). Optional config hash goes into the
  // header; parse rejects a mismatched expectation.
  std::string serialize(const std::string& config_hash = "none") const;
  static SdpProblem parse(const std::string& text,
                          const std::string& expected_hash = "");
  static SdpProblem parse_file(const std::string& path,
                               const std::string& expected_hash = "");
};

enum class SdpStatus { Optimal, Infeasible, Unbounded, Inaccurate };

const char* to_string(SdpStatus s);

struct SdpSolution {
  SdpStatus status = SdpStatus::Inaccurate;
  double objective = 0.0;
  std::vector<Eigen::MatrixXd> block_values;
  Eigen::VectorXd scalar_values;
  // Certificates / diagnostics.
  double primal_infeasibility = 0.0;  // worst original-constraint violation (relative)
  double dual_infeasibility = 0.0;
  double duality_gap = 0.0;  // |pobj - dobj| / (1 + |pobj| + |dobj|)
  double feas_margin = 0.0;  // from the strict-feasibility search, when run
  int iterations = 0;
  std::string message;
  // Dual variables aligned with the originating constraint lists (inequality
  // multipliers are >= 0 in the natural direction of each row).
  bool has_duals = false;
  std::vector<Eigen::MatrixXd> psd_duals;     // per variable block
  Eigen::VectorXd scalar_lb_duals;            // per scalar var (0 if unbounded)
  Eigen::VectorXd scalar_con_duals;           // per scalar constraint
  std::vector<Eigen::MatrixXd> lmi_duals;     // per LMI
};

struct SolveOptions {
  double tol = 1e-7;
  int max_iters = 200;
  // When the path-following stage fails to certify optimality, decide between
  // Infeasible / Inaccurate by maximizing the strict feasibility margin.
  bool certify_infeasibility = true;
  bool verbose = false;
};

SdpSolution solve_sdp(const SdpProblem& prob, const SolveOptions& opts = {});

struct KktReport {
  double primal_residual = 0.0;   // worst relative constraint violation
  double dual_residual = 0.0;     // stationarity residual, relative
  double complementarity = 0.0;   // worst normalized complementary slackness
  double duality_gap = 0.0;
  bool has_duals = false;
};

KktReport check_kkt(const SdpProblem& prob, const SdpSolution& sol);

// ---- complex <-> real embedding -------------------------------------------
// E(A) = [Re A, -Im A; Im A, Re A]. For Hermitian A this is symmetric and
// A >= 0 iff E(A) >= 0; tr(E(A) E(B)) = 2 Re tr(A B).

Eigen::MatrixXd embed_complex(const Eigen::MatrixXcd& a);
// Inverse for Hermitian embeddings; averages the two copies, which also
// projects out the (numerically tiny) asymmetric part of solver output.
Eigen::MatrixXcd unembed_hermitian(const Eigen::MatrixXd& a);
// Coefficient matrix such that <embed_herm_coeff(A), E(X)> = Re tr(A X).
Eigen::MatrixXd embed_herm_coeff(const Eigen::MatrixXcd& a);

}  // namespace cachebeam
