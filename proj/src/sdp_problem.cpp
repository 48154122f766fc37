#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cachebeam/sdp.hpp"

namespace cachebeam {

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::Unbounded: return "unbounded";
    case SdpStatus::Inaccurate: return "inaccurate";
  }
  return "?";
}

int SdpProblem::add_psd_block(const std::string& name, int dim) {
  if (dim < 1) throw std::invalid_argument("add_psd_block: dim must be >= 1");
  blocks.push_back({name, dim});
  obj_blocks.emplace_back();
  return static_cast<int>(blocks.size()) - 1;
}

int SdpProblem::add_scalar(const std::string& name, double lower) {
  scalars.push_back({name, lower, true});
  obj_scalars.conservativeResize(scalars.size());
  obj_scalars(scalars.size() - 1) = 0.0;
  return static_cast<int>(scalars.size()) - 1;
}

int SdpProblem::add_free_scalar(const std::string& name) {
  scalars.push_back({name, 0.0, false});
  obj_scalars.conservativeResize(scalars.size());
  obj_scalars(scalars.size() - 1) = 0.0;
  return static_cast<int>(scalars.size()) - 1;
}

void SdpProblem::set_block_objective(int block, const Eigen::MatrixXd& C) {
  obj_blocks.at(block) = 0.5 * (C + C.transpose());
}

void SdpProblem::set_scalar_objective(int var, double c) { obj_scalars(var) = c; }

int SdpProblem::add_scalar_constraint(ScalarConstraint con) {
  for (auto& b : con.blocks) b.A = 0.5 * (b.A + b.A.transpose()).eval();
  scalar_constraints.push_back(std::move(con));
  return static_cast<int>(scalar_constraints.size()) - 1;
}

int SdpProblem::add_lmi_constraint(LmiConstraint con) {
  for (auto& t : con.scalar_terms) t.F = 0.5 * (t.F + t.F.transpose()).eval();
  con.rhs = 0.5 * (con.rhs + con.rhs.transpose()).eval();
  lmi_constraints.push_back(std::move(con));
  return static_cast<int>(lmi_constraints.size()) - 1;
}

void SdpProblem::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("SdpProblem: " + m); };
  const int nb = static_cast<int>(blocks.size());
  const int ns = static_cast<int>(scalars.size());
  if (obj_blocks.size() != blocks.size()) fail("objective block list misaligned");
  if (obj_scalars.size() != ns) fail("objective scalar vector misaligned");
  for (int b = 0; b < nb; ++b) {
    if (blocks[b].dim < 1) fail("block '" + blocks[b].name + "' has dim < 1");
    if (obj_blocks[b].size() &&
        (obj_blocks[b].rows() != blocks[b].dim || obj_blocks[b].cols() != blocks[b].dim))
      fail("objective for block '" + blocks[b].name + "' has wrong shape");
  }
  for (const auto& sc : scalar_constraints) {
    for (const auto& bc : sc.blocks) {
      if (bc.block < 0 || bc.block >= nb) fail("scalar constraint '" + sc.name + "': bad block id");
      if (bc.A.rows() != blocks[bc.block].dim || bc.A.cols() != blocks[bc.block].dim)
        fail("scalar constraint '" + sc.name + "': coefficient shape mismatch");
      if (!bc.A.allFinite()) fail("scalar constraint '" + sc.name + "': non-finite coefficient");
    }
    for (const auto& s : sc.scalars)
      if (s.var < 0 || s.var >= ns) fail("scalar constraint '" + sc.name + "': bad scalar id");
    if (!std::isfinite(sc.rhs)) fail("scalar constraint '" + sc.name + "': non-finite rhs");
  }
  for (const auto& lmi : lmi_constraints) {
    if (lmi.dim < 1) fail("LMI '" + lmi.name + "' has dim < 1");
    if (lmi.rhs.rows() != lmi.dim || lmi.rhs.cols() != lmi.dim)
      fail("LMI '" + lmi.name + "': rhs shape mismatch");
    for (const auto& t : lmi.terms) {
      if (t.block < 0 || t.block >= nb) fail("LMI '" + lmi.name + "': bad block id");
      if (t.P.rows() != blocks[t.block].dim || t.P.cols() != lmi.dim)
        fail("LMI '" + lmi.name + "': P shape mismatch");
      if (!t.P.allFinite()) fail("LMI '" + lmi.name + "': non-finite P");
    }
    for (const auto& t : lmi.scalar_terms) {
      if (t.var < 0 || t.var >= ns) fail("LMI '" + lmi.name + "': bad scalar id");
      if (t.F.rows() != lmi.dim || t.F.cols() != lmi.dim)
        fail("LMI '" + lmi.name + "': F shape mismatch");
    }
  }
}

// ---- fixtures ---------------------------------------------------------------

namespace {

void emit(std::string& out, const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  out += buf;
}

void emit_dense(std::string& out, const char* tag, const Eigen::MatrixXd& m) {
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i)
      if (m(i, j) != 0.0) emit(out, "  %s %d %d %a\n", tag, i, j, m(i, j));
}

}  // namespace

std::string SdpProblem::serialize(const std::string& config_hash) const {
  validate();
  std::string out = "sdpfix v1\n";
  out += "config_hash " + (config_hash.empty() ? std::string("none") : config_hash) + "\n";
  for (const auto& b : blocks) emit(out, "psd_block %s %d\n", b.name.c_str(), b.dim);
  for (const auto& s : scalars) {
    if (s.has_lower)
      emit(out, "scalar %s %a\n", s.name.c_str(), s.lower);
    else
      emit(out, "scalar %s free\n", s.name.c_str());
  }
  emit(out, "objective_const %a\n", obj_constant);
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (obj_blocks[b].size()) {
      emit(out, "obj_block %zu\n", b);
      emit_dense(out, "e", obj_blocks[b]);
    }
  for (int j = 0; j < obj_scalars.size(); ++j)
    if (obj_scalars(j) != 0.0) emit(out, "obj_scalar %d %a\n", j, obj_scalars(j));
  for (const auto& sc : scalar_constraints) {
    const char* rel = sc.rel == Rel::LE ? "le" : (sc.rel == Rel::GE ? "ge" : "eq");
    emit(out, "scon %s %s %a\n", sc.name.empty() ? "-" : sc.name.c_str(), rel, sc.rhs);
    for (const auto& bc : sc.blocks) {
      emit(out, "  sb %d\n", bc.block);
      emit_dense(out, "e", bc.A);
    }
    for (const auto& s : sc.scalars) emit(out, "  ss %d %a\n", s.var, s.a);
    out += "  endc\n";
  }
  for (const auto& lmi : lmi_constraints) {
    emit(out, "lmi %s %d\n", lmi.name.empty() ? "-" : lmi.name.c_str(), lmi.dim);
    for (const auto& t : lmi.terms) {
      emit(out, "  mt %d %a\n", t.block, t.coeff);
      emit_dense(out, "p", t.P);
      out += "  endt\n";
    }
    for (const auto& t : lmi.scalar_terms) {
      emit(out, "  st %d\n", t.var);
      emit_dense(out, "e", t.F);
      out += "  endt\n";
    }
    out += "  rhs\n";
    emit_dense(out, "e", lmi.rhs);
    out += "  endc\n";
  }
  out += "end\n";
  return out;
}

namespace {

struct Tokens {
  std::stringstream ss;
  std::string next() {
    std::string t;
    if (!(ss >> t)) throw std::runtime_error("sdpfix: unexpected end of input");
    return t;
  }
  int next_int() { return std::stoi(next()); }
  double next_val() {
    std::string t = next();
    return std::strtod(t.c_str(), nullptr);
  }
};

// Reads "tag i j val" triplets until a terminator token; writes into m.
std::string read_dense(Tokens& tk, Eigen::MatrixXd& m, const char* tag) {
  for (;;) {
    std::string t = tk.next();
    if (t != tag) return t;
    int i = tk.next_int();
    int j = tk.next_int();
    double v = tk.next_val();
    if (i < 0 || i >= m.rows() || j < 0 || j >= m.cols())
      throw std::runtime_error("sdpfix: entry out of range");
    m(i, j) = v;
  }
}

}  // namespace

SdpProblem SdpProblem::parse(const std::string& text, const std::string& expected_hash) {
  Tokens tk;
  tk.ss.str(text);
  if (tk.next() != "sdpfix" || tk.next() != "v1")
    throw std::runtime_error("sdpfix: bad magic");
  if (tk.next() != "config_hash") throw std::runtime_error("sdpfix: missing config_hash");
  std::string hash = tk.next();
  if (!expected_hash.empty() && hash != expected_hash)
    throw std::runtime_error("sdpfix: fixture was written for a different config");

  SdpProblem p;
  std::string tok = tk.next();
  for (;;) {
    if (tok == "end") break;
    if (tok == "psd_block") {
      std::string name = tk.next();
      p.add_psd_block(name, tk.next_int());
      tok = tk.next();
    } else if (tok == "scalar") {
      std::string name = tk.next();
      std::string low = tk.next();
      if (low == "free")
        p.add_free_scalar(name);
      else
        p.add_scalar(name, std::strtod(low.c_str(), nullptr));
      tok = tk.next();
    } else if (tok == "objective_const") {
      p.obj_constant = tk.next_val();
      tok = tk.next();
    } else if (tok == "obj_block") {
      int b = tk.next_int();
      Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p.blocks.at(b).dim, p.blocks.at(b).dim);
      tok = read_dense(tk, C, "e");
      p.obj_blocks[b] = C;
    } else if (tok == "obj_scalar") {
      int v = tk.next_int();
      p.obj_scalars(v) = tk.next_val();
      tok = tk.next();
    } else if (tok == "scon") {
      ScalarConstraint sc;
      std::string name = tk.next();
      sc.name = (name == "-") ? "" : name;
      std::string rel = tk.next();
      sc.rel = rel == "le" ? Rel::LE : (rel == "ge" ? Rel::GE : Rel::EQ);
      sc.rhs = tk.next_val();
      tok = tk.next();
      while (tok != "endc") {
        if (tok == "sb") {
          BlockCoeff bc;
          bc.block = tk.next_int();
          bc.A = Eigen::MatrixXd::Zero(p.blocks.at(bc.block).dim, p.blocks.at(bc.block).dim);
          tok = read_dense(tk, bc.A, "e");
          sc.blocks.push_back(std::move(bc));
        } else if (tok == "ss") {
          ScalarCoeff s;
          s.var = tk.next_int();
          s.a = tk.next_val();
          sc.scalars.push_back(s);
          tok = tk.next();
        } else {
          throw std::runtime_error("sdpfix: unexpected token in scon: " + tok);
        }
      }
      p.add_scalar_constraint(std::move(sc));
      tok = tk.next();
    } else if (tok == "lmi") {
      LmiConstraint lmi;
      std::string name = tk.next();
      lmi.name = (name == "-") ? "" : name;
      lmi.dim = tk.next_int();
      lmi.rhs = Eigen::MatrixXd::Zero(lmi.dim, lmi.dim);
      tok = tk.next();
      while (tok != "endc") {
        if (tok == "mt") {
          LmiTerm t;
          t.block = tk.next_int();
          t.coeff = tk.next_val();
          t.P = Eigen::MatrixXd::Zero(p.blocks.at(t.block).dim, lmi.dim);
          tok = read_dense(tk, t.P, "p");
          if (tok != "endt") throw std::runtime_error("sdpfix: missing endt");
          lmi.terms.push_back(std::move(t));
          tok = tk.next();
        } else if (tok == "st") {
          LmiScalarTerm t;
          t.var = tk.next_int();
          t.F = Eigen::MatrixXd::Zero(lmi.dim, lmi.dim);
          tok = read_dense(tk, t.F, "e");
          if (tok != "endt") throw std::runtime_error("sdpfix: missing endt");
          lmi.scalar_terms.push_back(std::move(t));
          tok = tk.next();
        } else if (tok == "rhs") {
          tok = read_dense(tk, lmi.rhs, "e");
        } else {
          throw std::runtime_error("sdpfix: unexpected token in lmi: " + tok);
        }
      }
      p.add_lmi_constraint(std::move(lmi));
      tok = tk.next();
    } else {
      throw std::runtime_error("sdpfix: unexpected token: " + tok);
    }
  }
  p.validate();
  return p;
}

SdpProblem SdpProblem::parse_file(const std::string& path, const std::string& expected_hash) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("sdpfix: cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), expected_hash);
}

// ---- embedding --------------------------------------------------------------

Eigen::MatrixXd embed_complex(const Eigen::MatrixXcd& a) {
  const int r = static_cast<int>(a.rows());
  const int c = static_cast<int>(a.cols());
  Eigen::MatrixXd e(2 * r, 2 * c);
  e.topLeftCorner(r, c) = a.real();
  e.topRightCorner(r, c) = -a.imag();
  e.bottomLeftCorner(r, c) = a.imag();
  e.bottomRightCorner(r, c) = a.real();
  return e;
}

Eigen::MatrixXcd unembed_hermitian(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() % 2 != 0)
    throw std::invalid_argument("unembed_hermitian: matrix must be square with even dim");
  const int d = static_cast<int>(a.rows()) / 2;
  Eigen::MatrixXd re = 0.5 * (a.topLeftCorner(d, d) + a.bottomRightCorner(d, d));
  Eigen::MatrixXd im = 0.5 * (a.bottomLeftCorner(d, d) - a.topRightCorner(d, d));
  Eigen::MatrixXcd z(d, d);
  z.real() = 0.5 * (re + re.transpose());
  z.imag() = 0.5 * (im - im.transpose());
  return z;
}

Eigen::MatrixXd embed_herm_coeff(const Eigen::MatrixXcd& a) {
  return 0.5 * embed_complex(a);
}

}  // namespace cachebeam
