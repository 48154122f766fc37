#include "cachebeam/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cachebeam {

Eigen::VectorXd zipf_popularity(int num_files, double exponent) {
  if (num_files < 1) throw std::invalid_argument("zipf_popularity: num_files must be >= 1");
  Eigen::VectorXd theta(num_files);
  for (int f = 0; f < num_files; ++f)
    theta(f) = std::pow(static_cast<double>(f + 1), -exponent);
  theta /= theta.sum();
  return theta;
}

double path_loss_gain(double distance_m) {
  if (!(distance_m > 0)) throw std::invalid_argument("path_loss_gain: distance must be > 0");
  double pl_db = 128.1 + 37.6 * std::log10(distance_m / 1000.0);
  return std::pow(10.0, -pl_db / 10.0);
}

bool in_cell_union(const Eigen::Matrix2Xd& bs_positions, double inter_bs_m,
                   const Eigen::Vector2d& p) {
  const double half = inter_bs_m / 2.0;
  for (int m = 0; m < bs_positions.cols(); ++m) {
    Eigen::Vector2d q = p - bs_positions.col(m);
    bool inside = true;
    for (int k = 0; k < 3 && inside; ++k) {
      double ang = k * M_PI / 3.0;
      inside = std::abs(q.x() * std::cos(ang) + q.y() * std::sin(ang)) <= half;
    }
    if (inside) return true;
  }
  return false;
}

namespace {

Eigen::Vector2d sample_position(const SystemConfig& cfg, const Eigen::Matrix2Xd& bs,
                                RandomStream& rng) {
  const double d = cfg.inter_bs_distance_m;
  const double reach = (cfg.num_bs > 1 ? d : 0.0) + d / std::sqrt(3.0);
  for (long attempt = 0; attempt < 1000000; ++attempt) {
    Eigen::Vector2d p(rng.uniform(-reach, reach), rng.uniform(-reach, reach));
    if (!in_cell_union(bs, d, p)) continue;
    bool clear = true;
    for (int m = 0; m < bs.cols() && clear; ++m)
      clear = (p - bs.col(m)).norm() >= cfg.min_rx_distance_m;
    if (clear) return p;
  }
  throw std::runtime_error("generate_topology: placement rejection sampling exceeded 1e6 attempts");
}

}  // namespace

Topology generate_topology(const SystemConfig& cfg, RandomStream& rng) {
  cfg.validate();
  Topology topo;
  topo.bs_positions.resize(2, cfg.num_bs);
  topo.bs_positions.col(0).setZero();
  for (int m = 1; m < cfg.num_bs; ++m) {
    double ang = (m - 1) * M_PI / 3.0;
    topo.bs_positions.col(m) =
        cfg.inter_bs_distance_m * Eigen::Vector2d(std::cos(ang), std::sin(ang));
  }
  topo.lr_positions.resize(2, cfg.num_lr);
  for (int k = 0; k < cfg.num_lr; ++k)
    topo.lr_positions.col(k) = sample_position(cfg, topo.bs_positions, rng);
  topo.er_position = sample_position(cfg, topo.bs_positions, rng);
  return topo;
}

int sample_file(const Eigen::VectorXd& popularity, RandomStream& rng) {
  std::vector<double> p(popularity.data(), popularity.data() + popularity.size());
  return rng.pick(p);
}

double sample_backhaul(const SystemConfig& cfg, RandomStream& rng) {
  std::vector<double> p;
  p.reserve(cfg.backhaul_distribution.size());
  for (const auto& a : cfg.backhaul_distribution) p.push_back(a.prob);
  return cfg.backhaul_distribution[rng.pick(p)].rate_bps;
}

Scenario generate_scenario(const SystemConfig& cfg, const Topology& topology,
                           const Eigen::VectorXd& popularity, RandomStream& rng) {
  if (popularity.size() != cfg.num_files)
    throw std::invalid_argument("generate_scenario: popularity size != num_files");
  if (topology.bs_positions.cols() != cfg.num_bs ||
      topology.lr_positions.cols() != cfg.num_lr)
    throw std::invalid_argument("generate_scenario: topology does not match config");

  const int m_total = cfg.num_bs * cfg.antennas_per_bs;
  Scenario sc;
  sc.topology = topology;

  sc.requests.resize(cfg.num_lr);
  for (int k = 0; k < cfg.num_lr; ++k) sc.requests[k] = {k, sample_file(popularity, rng)};

  sc.lr_channels.resize(cfg.num_lr);
  for (int k = 0; k < cfg.num_lr; ++k) {
    Eigen::VectorXcd h(m_total);
    for (int m = 0; m < cfg.num_bs; ++m) {
      double dist = (topology.lr_positions.col(k) - topology.bs_positions.col(m)).norm();
      double amp = std::sqrt(path_loss_gain(dist) / cfg.noise_power_w);
      for (int t = 0; t < cfg.antennas_per_bs; ++t)
        h(m * cfg.antennas_per_bs + t) = amp * rng.cnormal();
    }
    sc.lr_channels[k] = h;
  }

  sc.er_true.resize(m_total, cfg.er_antennas);
  for (int e = 0; e < cfg.er_antennas; ++e) {
    for (int m = 0; m < cfg.num_bs; ++m) {
      double dist = (topology.er_position - topology.bs_positions.col(m)).norm();
      double amp = std::sqrt(path_loss_gain(dist) / cfg.er_noise_power_w);
      for (int t = 0; t < cfg.antennas_per_bs; ++t)
        sc.er_true(m * cfg.antennas_per_bs + t, e) = amp * rng.cnormal();
    }
  }

  sc.eps = std::sqrt(cfg.normalized_csi_error) * sc.er_true.norm();
  if (cfg.normalized_csi_error > 0) {
    Eigen::MatrixXcd dir(m_total, cfg.er_antennas);
    for (int e = 0; e < cfg.er_antennas; ++e)
      for (int i = 0; i < m_total; ++i) dir(i, e) = rng.cnormal();
    double real_dim = 2.0 * m_total * cfg.er_antennas;
    double radius = sc.eps * std::pow(rng.uniform(), 1.0 / real_dim);
    Eigen::MatrixXcd raw = (radius / dir.norm()) * dir;
    // The stored triple must satisfy G == Ghat + dG bitwise even where an
    // error component dwarfs the channel entry it perturbs (the ball radius
    // scales with the whole matrix norm, individual entries do not).  No
    // choice of Ghat makes that identity hold against the drawn G in such
    // entries, so after splitting we re-round the truth as the single-rounded
    // sum Ghat + dG; this moves each entry of G by at most the rounding error
    // of that sum.  The radius is nudged down if the re-rounded difference
    // pokes out of the ball.
    const Eigen::MatrixXcd drawn = sc.er_true;
    for (int guard = 0; guard < 32; ++guard) {
      sc.er_est = drawn - raw;
      sc.er_err = drawn - sc.er_est;
      if (sc.er_err.norm() <= sc.eps) break;
      raw *= (sc.eps / sc.er_err.norm()) * (1.0 - 1e-14);
    }
    if (sc.er_err.norm() > sc.eps)
      throw std::runtime_error("generate_scenario: could not place CSI error inside the ball");
    sc.er_true = sc.er_est + sc.er_err;
  } else {
    sc.er_est = sc.er_true;
    sc.er_err = Eigen::MatrixXcd::Zero(m_total, cfg.er_antennas);
  }

  sc.backhaul_bps.resize(cfg.num_bs);
  for (int m = 0; m < cfg.num_bs; ++m) sc.backhaul_bps(m) = sample_backhaul(cfg, rng);
  return sc;
}

Scenario generate_scenario(const SystemConfig& cfg, std::uint64_t seed) {
  RandomStream rng(seed);
  Topology topo = generate_topology(cfg, rng);
  return generate_scenario(cfg, topo, zipf_popularity(cfg.num_files, cfg.zipf_exponent), rng);
}

std::vector<int> requested_files(const Scenario& sc) {
  std::set<int> files;
  for (const auto& r : sc.requests) files.insert(r.file);
  return std::vector<int>(files.begin(), files.end());
}

std::vector<std::vector<int>> streams_per_file(const Scenario& sc) {
  std::vector<int> files = requested_files(sc);
  std::vector<std::vector<int>> out(files.size());
  for (std::size_t i = 0; i < files.size(); ++i)
    for (std::size_t r = 0; r < sc.requests.size(); ++r)
      if (sc.requests[r].file == files[i]) out[i].push_back(static_cast<int>(r));
  return out;
}

namespace {

void emit_hex(std::string& out, const char* tag, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s %a\n", tag, v);
  out += buf;
}

}  // namespace

std::string serialize_scenario(const SystemConfig& cfg, const Scenario& sc) {
  std::string out = "scenario v1\nconfig_hash " + config_hash(cfg) + "\n";
  char buf[256];
  const int m_total = cfg.num_bs * cfg.antennas_per_bs;
  for (int m = 0; m < cfg.num_bs; ++m) {
    std::snprintf(buf, sizeof(buf), "bs %d %a %a\n", m, sc.topology.bs_positions(0, m),
                  sc.topology.bs_positions(1, m));
    out += buf;
  }
  for (int k = 0; k < cfg.num_lr; ++k) {
    std::snprintf(buf, sizeof(buf), "lr %d %a %a\n", k, sc.topology.lr_positions(0, k),
                  sc.topology.lr_positions(1, k));
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "er_pos %a %a\n", sc.topology.er_position.x(),
                sc.topology.er_position.y());
  out += buf;
  for (int k = 0; k < cfg.num_lr; ++k) {
    std::snprintf(buf, sizeof(buf), "request %d %d\n", k, sc.requests[k].file);
    out += buf;
  }
  for (int k = 0; k < cfg.num_lr; ++k)
    for (int i = 0; i < m_total; ++i) {
      std::snprintf(buf, sizeof(buf), "h %d %d %a %a\n", k, i, sc.lr_channels[k](i).real(),
                    sc.lr_channels[k](i).imag());
      out += buf;
    }
  for (int j = 0; j < cfg.er_antennas; ++j)
    for (int i = 0; i < m_total; ++i) {
      std::snprintf(buf, sizeof(buf), "G %d %d %a %a\n", i, j, sc.er_true(i, j).real(),
                    sc.er_true(i, j).imag());
      out += buf;
    }
  for (int j = 0; j < cfg.er_antennas; ++j)
    for (int i = 0; i < m_total; ++i) {
      std::snprintf(buf, sizeof(buf), "Ghat %d %d %a %a\n", i, j, sc.er_est(i, j).real(),
                    sc.er_est(i, j).imag());
      out += buf;
    }
  for (int j = 0; j < cfg.er_antennas; ++j)
    for (int i = 0; i < m_total; ++i) {
      std::snprintf(buf, sizeof(buf), "dG %d %d %a %a\n", i, j, sc.er_err(i, j).real(),
                    sc.er_err(i, j).imag());
      out += buf;
    }
  emit_hex(out, "eps", sc.eps);
  for (int m = 0; m < cfg.num_bs; ++m) {
    std::snprintf(buf, sizeof(buf), "backhaul %d %a\n", m, sc.backhaul_bps(m));
    out += buf;
  }
  out += "end\n";
  return out;
}

Scenario parse_scenario(const SystemConfig& cfg, const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line) || line != "scenario v1")
    throw std::runtime_error("parse_scenario: bad magic line");
  const int m_total = cfg.num_bs * cfg.antennas_per_bs;
  Scenario sc;
  sc.topology.bs_positions.resize(2, cfg.num_bs);
  sc.topology.lr_positions.resize(2, cfg.num_lr);
  sc.requests.resize(cfg.num_lr);
  sc.lr_channels.assign(cfg.num_lr, Eigen::VectorXcd::Zero(m_total));
  sc.er_true.setZero(m_total, cfg.er_antennas);
  sc.er_est.setZero(m_total, cfg.er_antennas);
  sc.backhaul_bps.setZero(cfg.num_bs);
  bool have_err = false;

  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string tag;
    ls >> tag;
    auto want = [&](bool ok, const char* what) {
      if (!ok) throw std::runtime_error(std::string("parse_scenario: bad ") + what + " line: " + line);
    };
    auto hexval = [&]() {
      std::string t;
      ls >> t;
      return std::strtod(t.c_str(), nullptr);
    };
    if (tag == "config_hash") {
      std::string h;
      ls >> h;
      if (h != config_hash(cfg))
        throw std::runtime_error("parse_scenario: fixture was written for a different config");
    } else if (tag == "bs") {
      int m;
      want(static_cast<bool>(ls >> m) && m >= 0 && m < cfg.num_bs, "bs");
      sc.topology.bs_positions(0, m) = hexval();
      sc.topology.bs_positions(1, m) = hexval();
    } else if (tag == "lr") {
      int k;
      want(static_cast<bool>(ls >> k) && k >= 0 && k < cfg.num_lr, "lr");
      sc.topology.lr_positions(0, k) = hexval();
      sc.topology.lr_positions(1, k) = hexval();
    } else if (tag == "er_pos") {
      sc.topology.er_position.x() = hexval();
      sc.topology.er_position.y() = hexval();
    } else if (tag == "request") {
      int k, f;
      want(static_cast<bool>(ls >> k >> f) && k >= 0 && k < cfg.num_lr, "request");
      want(f >= 0 && f < cfg.num_files, "request file");
      sc.requests[k] = {k, f};
    } else if (tag == "h") {
      int k, i;
      want(static_cast<bool>(ls >> k >> i) && k >= 0 && k < cfg.num_lr && i >= 0 && i < m_total, "h");
      double re = hexval(), im = hexval();
      sc.lr_channels[k](i) = {re, im};
    } else if (tag == "G" || tag == "Ghat" || tag == "dG") {
      int i, j;
      want(static_cast<bool>(ls >> i >> j) && i >= 0 && i < m_total && j >= 0 && j < cfg.er_antennas,
           "G");
      double re = hexval(), im = hexval();
      if (tag == "dG") {
        if (!have_err) {
          sc.er_err.setZero(m_total, cfg.er_antennas);
          have_err = true;
        }
        sc.er_err(i, j) = {re, im};
      } else {
        (tag == "G" ? sc.er_true : sc.er_est)(i, j) = {re, im};
      }
    } else if (tag == "eps") {
      sc.eps = hexval();
    } else if (tag == "backhaul") {
      int m;
      want(static_cast<bool>(ls >> m) && m >= 0 && m < cfg.num_bs, "backhaul");
      sc.backhaul_bps(m) = hexval();
    } else if (tag == "end") {
      if (!have_err) sc.er_err = sc.er_true - sc.er_est;
      return sc;
    } else {
      throw std::runtime_error("parse_scenario: unknown tag '" + tag + "'");
    }
  }
  throw std::runtime_error("parse_scenario: missing end marker");
}

}  // namespace cachebeam
