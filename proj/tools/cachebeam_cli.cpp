// Batch experiment front-end: reads a key-value config (system parameters
// plus optional experiment keys), runs the requested sweep or trial, and
// writes a fixed-schema CSV atomically. Exit code 0 on success, 1 on any
// error or selftest failure.

#include <CLI11.hpp>
#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cachebeam/evaluate.hpp"
#include "cachebeam/selftest.hpp"

namespace cb = cachebeam;
using nlohmann::json;

namespace {

struct ExperimentSpec {
  std::string kind = "cache_sweep";
  std::vector<std::pair<cb::CachingScheme, cb::DeliveryScheme>> schemes;
  std::vector<double> grid;
  int n_trials = 20;
  std::uint64_t master_seed = 20260825;
  std::string out = "sweep.csv";
};

const std::vector<std::string> kKinds = {"cache_sweep", "csi_error_sweep", "antenna_sweep",
                                         "single_trial", "selftest"};

cb::CachingScheme parse_caching(const std::string& s) {
  if (s == "optimized") return cb::CachingScheme::Optimized;
  if (s == "nosec") return cb::CachingScheme::NoSecurity;
  if (s == "preference") return cb::CachingScheme::Preference;
  if (s == "uniform") return cb::CachingScheme::Uniform;
  throw std::invalid_argument("unknown caching scheme '" + s +
                              "' (optimized|nosec|preference|uniform)");
}

cb::DeliveryScheme parse_delivery(const std::string& s) {
  if (s == "greedy") return cb::DeliveryScheme::Greedy;
  if (s == "coordinated") return cb::DeliveryScheme::Coordinated;
  if (s == "fullcoop") return cb::DeliveryScheme::FullCooperation;
  if (s == "nonrobust") return cb::DeliveryScheme::NonRobust;
  throw std::invalid_argument("unknown delivery scheme '" + s +
                              "' (greedy|coordinated|fullcoop|nonrobust)");
}

std::pair<cb::CachingScheme, cb::DeliveryScheme> parse_scheme(const std::string& s) {
  auto plus = s.find('+');
  if (plus == std::string::npos)
    throw std::invalid_argument("scheme '" + s + "' must be caching+delivery");
  return {parse_caching(s.substr(0, plus)), parse_delivery(s.substr(plus + 1))};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> g;
  for (const auto& tok : split_list(s)) {
    try {
      std::size_t pos = 0;
      g.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument("");
    } catch (...) {
      throw std::invalid_argument("grid entry '" + tok + "' is not a number");
    }
  }
  return g;
}

// The config file may carry experiment keys next to the system keys; strip
// them here, hand the remainder to the strict system-config parser.
std::pair<cb::SystemConfig, ExperimentSpec> parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();

  ExperimentSpec spec;
  std::string system_lines;
  std::string line;
  std::istringstream in(ss.str());
  while (std::getline(in, line)) {
    std::string stripped = line.substr(0, line.find('#'));
    auto eq = stripped.find('=');
    std::string key;
    if (eq != std::string::npos) {
      key = stripped.substr(0, eq);
      key.erase(0, key.find_first_not_of(" \t"));
      key.erase(key.find_last_not_of(" \t") + 1);
    }
    std::string value = eq == std::string::npos ? "" : stripped.substr(eq + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    value.erase(value.find_last_not_of(" \t\r\n") + 1);
    if (key == "experiment") {
      if (std::find(kKinds.begin(), kKinds.end(), value) == kKinds.end())
        throw std::invalid_argument("experiment must be one of cache_sweep, csi_error_sweep, "
                                    "antenna_sweep, single_trial, selftest; got '" +
                                    value + "'");
      spec.kind = value;
    } else if (key == "schemes") {
      spec.schemes.clear();
      for (const auto& tok : split_list(value)) spec.schemes.push_back(parse_scheme(tok));
    } else if (key == "grid") {
      spec.grid = parse_grid(value);
    } else if (key == "trials") {
      spec.n_trials = std::stoi(value);
    } else if (key == "seed") {
      spec.master_seed = std::stoull(value);
    } else if (key == "out") {
      spec.out = value;
    } else {
      system_lines += line + "\n";
    }
  }
  return {cb::parse_config_text(system_lines), spec};
}

json trial_json(const cb::TrialResult& t) {
  json j;
  j["scheme"] = t.scheme;
  j["seed"] = t.seed;
  j["cache_capacity_bits"] = t.cache_capacity_bits;
  j["feasible"] = t.feasible;
  j["outage"] = t.outage;
  j["audit_ok"] = t.audit_ok;
  j["total_power_w"] = t.total_power_w;
  j["sdp_objective_w"] = t.sdp_objective_w;
  j["avg_coop_bs"] = t.avg_coop_bs;
  j["min_secrecy_rate_bpshz"] = t.min_secrecy_rate;
  j["max_rank_ratio"] = t.max_rank_ratio;
  j["removals"] = t.removals;
  j["candidate_solves"] = t.candidate_solves;
  j["per_bs_power_w"] = std::vector<double>(t.per_bs_power.data(),
                                            t.per_bs_power.data() + t.per_bs_power.size());
  j["lr_rates_bpshz"] =
      std::vector<double>(t.lr_rates.data(), t.lr_rates.data() + t.lr_rates.size());
  j["worst_case_er_bpshz"] = std::vector<double>(
      t.worst_case_er.data(), t.worst_case_er.data() + t.worst_case_er.size());
  j["message"] = t.message;
  return j;
}

int run_sweeps(const cb::SystemConfig& cfg, const ExperimentSpec& spec,
               const std::string& dump_dir) {
  std::vector<cb::SweepRow> rows;
  for (auto [caching, delivery] : spec.schemes) {
    cb::TrialSink sink;
    if (!dump_dir.empty()) {
      std::string label = cb::scheme_label(caching, delivery);
      sink = [&, label](int point, int trial, const cb::TrialResult& t) {
        std::string name =
            label + "_p" + std::to_string(point) + "_t" + std::to_string(trial) + ".json";
        std::ofstream out(std::filesystem::path(dump_dir) / name);
        out << trial_json(t).dump(2) << "\n";
      };
    }
    std::vector<cb::SweepRow> part;
    if (spec.kind == "cache_sweep")
      part = cb::run_cache_sweep(cfg, caching, delivery, spec.grid, spec.n_trials,
                                 spec.master_seed, {}, sink);
    else if (spec.kind == "csi_error_sweep")
      part = cb::run_csi_error_sweep(cfg, caching, delivery, spec.grid, spec.n_trials,
                                     spec.master_seed, {}, sink);
    else
      part = cb::run_antenna_sweep(cfg, caching, delivery, spec.grid, spec.n_trials,
                                   spec.master_seed, {}, sink);
    for (const auto& row : part) {
      std::cout << row.scheme << " @ " << row.swept_value << ": ";
      if (!row.trained)
        std::cout << "training infeasible\n";
      else
        std::cout << row.n_feasible << "/" << row.n_trials << " feasible, "
                  << row.avg_power_dbm << " dBm, p_out " << row.p_out << "\n";
      rows.push_back(row);
    }
  }
  cb::write_csv(rows, spec.out);
  std::cout << "wrote " << rows.size() << " rows to " << spec.out << "\n";
  return 0;
}

int run_single_trial(const cb::SystemConfig& cfg, const ExperimentSpec& spec,
                     const std::string& dump_dir) {
  auto [caching, delivery] = spec.schemes.front();
  cb::CacheMatrix cache = cb::build_cache(cfg, caching, spec.master_seed, 0);
  cb::TrialResult t = cb::run_delivery_trial(cfg, cache, delivery, spec.master_seed);
  t.scheme = cb::scheme_label(caching, delivery);
  json j = trial_json(t);
  std::cout << j.dump(2) << "\n";
  if (!dump_dir.empty()) {
    std::ofstream out(std::filesystem::path(dump_dir) / "single_trial.json");
    out << j.dump(2) << "\n";
  }
  return t.feasible ? 0 : 1;
}

int run_selftest(bool full) {
  std::cout << "acceptance battery (" << (full ? "full" : "reduced") << " counts)\n";
  auto results = cb::run_acceptance(full, &std::cout);
  int failed = 0;
  for (const auto& r : results) failed += r.pass ? 0 : 1;
  std::cout << (static_cast<int>(results.size()) - failed) << "/" << results.size()
            << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cache-enabled secure-delivery simulator"};
  std::string config_path, experiment, out_path, dump_dir, grid_str, schemes_str;
  std::uint64_t seed = 0;
  int trials = -1;
  bool reduced = false, full_selftest = false;
  bool seed_set = false;

  app.add_option("--config", config_path, "key-value config file");
  app.add_option("--experiment", experiment,
                 "cache_sweep|csi_error_sweep|antenna_sweep|single_trial|selftest");
  app.add_option("--seed", seed, "master seed (u64)")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--trials", trials, "Monte Carlo trials per sweep point");
  app.add_option("--out", out_path, "output CSV path");
  app.add_option("--dump-trials", dump_dir, "directory for per-trial JSON dumps");
  app.add_option("--grid", grid_str, "comma-separated sweep grid (overrides config)");
  app.add_option("--schemes", schemes_str,
                 "comma-separated caching+delivery pairs, e.g. optimized+greedy");
  app.add_flag("--reduced", reduced, "use the small test configuration");
  app.add_flag("--full", full_selftest, "selftest only: run the full acceptance counts");
  CLI11_PARSE(app, argc, argv);

  try {
    cb::SystemConfig cfg = reduced ? cb::reduced_config() : cb::default_config();
    ExperimentSpec spec;
    if (!config_path.empty()) {
      auto [parsed_cfg, parsed_spec] = parse_config(config_path);
      if (reduced)
        throw std::invalid_argument("--reduced and --config are mutually exclusive");
      cfg = parsed_cfg;
      spec = parsed_spec;
    }
    if (!experiment.empty()) {
      if (std::find(kKinds.begin(), kKinds.end(), experiment) == kKinds.end())
        throw std::invalid_argument("unknown experiment '" + experiment + "'");
      spec.kind = experiment;
    }
    if (seed_set) spec.master_seed = seed;
    if (trials >= 0) spec.n_trials = trials;
    if (!out_path.empty()) spec.out = out_path;
    if (!grid_str.empty()) spec.grid = parse_grid(grid_str);
    if (!schemes_str.empty()) {
      spec.schemes.clear();
      for (const auto& tok : split_list(schemes_str)) spec.schemes.push_back(parse_scheme(tok));
    }
    if (spec.schemes.empty())
      spec.schemes = {{cb::CachingScheme::Optimized, cb::DeliveryScheme::Greedy},
                      {cb::CachingScheme::Preference, cb::DeliveryScheme::Greedy},
                      {cb::CachingScheme::Uniform, cb::DeliveryScheme::Greedy}};
    if (spec.grid.empty()) {
      if (spec.kind == "csi_error_sweep")
        spec.grid = {0.01, 0.05, 0.1};
      else if (spec.kind == "antenna_sweep")
        spec.grid = {2, 3, 4};
      else
        spec.grid = {10, 30, 50, 70};
    }
    if (!dump_dir.empty()) std::filesystem::create_directories(dump_dir);

    if (spec.kind == "selftest") return run_selftest(full_selftest);
    if (spec.kind == "single_trial") return run_single_trial(cfg, spec, dump_dir);
    return run_sweeps(cfg, spec, dump_dir);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
