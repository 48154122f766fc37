// Python bindings for the secure-delivery simulator: configuration, scenario
// generation, cache placement/training, per-trial evaluation, and sweeps.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cachebeam/caching.hpp"
#include "cachebeam/config.hpp"
#include "cachebeam/delivery.hpp"
#include "cachebeam/evaluate.hpp"
#include "cachebeam/model.hpp"
#include "cachebeam/rng.hpp"

namespace py = pybind11;
using namespace cachebeam;

PYBIND11_MODULE(pycachebeam, m) {
  m.doc() = "cache-enabled physical-layer-secure delivery simulator";

  // ---- configuration --------------------------------------------------------
  py::class_<BackhaulAtom>(m, "BackhaulAtom")
      .def(py::init<>())
      .def_readwrite("rate_bps", &BackhaulAtom::rate_bps)
      .def_readwrite("prob", &BackhaulAtom::prob);

  py::class_<SystemConfig>(m, "SystemConfig")
      .def(py::init<>())
      .def_readwrite("num_bs", &SystemConfig::num_bs)
      .def_readwrite("antennas_per_bs", &SystemConfig::antennas_per_bs)
      .def_readwrite("er_antennas", &SystemConfig::er_antennas)
      .def_readwrite("num_lr", &SystemConfig::num_lr)
      .def_readwrite("num_files", &SystemConfig::num_files)
      .def_readwrite("file_size_bits", &SystemConfig::file_size_bits)
      .def_readwrite("subfiles", &SystemConfig::subfiles)
      .def_readwrite("slot_duration_s", &SystemConfig::slot_duration_s)
      .def_readwrite("bandwidth_hz", &SystemConfig::bandwidth_hz)
      .def_readwrite("noise_power_w", &SystemConfig::noise_power_w)
      .def_readwrite("er_noise_power_w", &SystemConfig::er_noise_power_w)
      .def_readwrite("max_tx_power_w", &SystemConfig::max_tx_power_w)
      .def_readwrite("cache_capacity_bits", &SystemConfig::cache_capacity_bits)
      .def_readwrite("qos_rate_bps", &SystemConfig::qos_rate_bps)
      .def_readwrite("secrecy_rate_tol_bps", &SystemConfig::secrecy_rate_tol_bps)
      .def_readwrite("zipf_exponent", &SystemConfig::zipf_exponent)
      .def_readwrite("normalized_csi_error", &SystemConfig::normalized_csi_error)
      .def_readwrite("inter_bs_distance_m", &SystemConfig::inter_bs_distance_m)
      .def_readwrite("min_rx_distance_m", &SystemConfig::min_rx_distance_m)
      .def_readwrite("num_training_scenarios", &SystemConfig::num_training_scenarios)
      .def_readwrite("backhaul_distribution", &SystemConfig::backhaul_distribution)
      .def("subfile_rate_bps", &SystemConfig::subfile_rate_bps)
      .def("library_bits", &SystemConfig::library_bits)
      .def("qos_rate_bpshz", &SystemConfig::qos_rate_bpshz)
      .def("tol_rate_bpshz", &SystemConfig::tol_rate_bpshz)
      .def("sinr_target", &SystemConfig::sinr_target)
      .def("secrecy_kappa_tol", &SystemConfig::secrecy_kappa_tol)
      .def("validate", &SystemConfig::validate);

  m.def("default_config", &default_config);
  m.def("reduced_config", &reduced_config);
  m.def("parse_config_text", &parse_config_text, py::arg("text"));
  m.def("parse_config_file", &parse_config_file, py::arg("path"));
  m.def("serialize_config", &serialize_config, py::arg("cfg"));
  m.def("config_hash", &config_hash, py::arg("cfg"));

  // ---- scenario model -------------------------------------------------------
  m.def("zipf_popularity", &zipf_popularity, py::arg("num_files"), py::arg("exponent"));
  m.def("path_loss_gain", &path_loss_gain, py::arg("distance_m"));
  m.def("derive_seed",
        [](std::uint64_t master, const std::vector<std::uint64_t>& tags) {
          return derive_seed(master, tags);
        },
        py::arg("master"), py::arg("tags"),
        "published sub-stream seed derivation (splitmix64 fold)");

  py::class_<Topology>(m, "Topology")
      .def_readonly("bs_positions", &Topology::bs_positions)
      .def_readonly("lr_positions", &Topology::lr_positions)
      .def_readonly("er_position", &Topology::er_position);

  py::class_<Request>(m, "Request")
      .def_readonly("lr", &Request::lr)
      .def_readonly("file", &Request::file);

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("topology", &Scenario::topology)
      .def_readonly("requests", &Scenario::requests)
      .def_readonly("lr_channels", &Scenario::lr_channels)
      .def_readonly("er_true", &Scenario::er_true)
      .def_readonly("er_est", &Scenario::er_est)
      .def_readonly("er_err", &Scenario::er_err)
      .def_readonly("eps", &Scenario::eps)
      .def_readonly("backhaul_bps", &Scenario::backhaul_bps);

  m.def("generate_scenario",
        [](const SystemConfig& cfg, std::uint64_t seed) {
          return generate_scenario(cfg, seed);
        },
        py::arg("cfg"), py::arg("seed"));
  m.def("serialize_scenario", &serialize_scenario, py::arg("cfg"), py::arg("scenario"));
  m.def("parse_scenario", &parse_scenario, py::arg("cfg"), py::arg("text"));

  // ---- caching --------------------------------------------------------------
  py::class_<CacheMatrix>(m, "CacheMatrix")
      .def(py::init<>())
      .def_readwrite("c", &CacheMatrix::c)
      .def("validate", &CacheMatrix::validate, py::arg("cfg"))
      .def("serialize", &CacheMatrix::serialize, py::arg("config_hash"))
      .def_static("parse", &CacheMatrix::parse, py::arg("text"),
                  py::arg("expected_hash") = "")
      .def_static("parse_file", &CacheMatrix::parse_file, py::arg("path"),
                  py::arg("expected_hash") = "");

  m.def("preference_caching", &preference_caching, py::arg("cfg"));
  m.def("uniform_caching", &uniform_caching, py::arg("cfg"));

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("cache", &TrainResult::cache)
      .def_readonly("objective", &TrainResult::objective)
      .def_readonly("binariness", &TrainResult::binariness)
      .def_readonly("iterations", &TrainResult::iterations);

  py::register_exception<TrainingInfeasible>(m, "TrainingInfeasible");

  m.def("train_cache",
        [](const SystemConfig& cfg, const std::vector<Scenario>& scenarios,
           bool include_secrecy) { return train_cache(cfg, scenarios, include_secrecy); },
        py::arg("cfg"), py::arg("scenarios"), py::arg("include_secrecy") = true);
  m.def("training_scenarios", &training_scenarios, py::arg("cfg"),
        py::arg("master_seed"), py::arg("point_index") = 0);

  // ---- schemes and trials ---------------------------------------------------
  py::enum_<CachingScheme>(m, "CachingScheme")
      .value("Optimized", CachingScheme::Optimized)
      .value("NoSecurity", CachingScheme::NoSecurity)
      .value("Preference", CachingScheme::Preference)
      .value("Uniform", CachingScheme::Uniform);

  py::enum_<DeliveryScheme>(m, "DeliveryScheme")
      .value("Greedy", DeliveryScheme::Greedy)
      .value("Coordinated", DeliveryScheme::Coordinated)
      .value("FullCooperation", DeliveryScheme::FullCooperation)
      .value("NonRobust", DeliveryScheme::NonRobust);

  m.def("scheme_label", &scheme_label, py::arg("caching"), py::arg("delivery"));
  m.def("build_cache",
        [](const SystemConfig& cfg, CachingScheme scheme, std::uint64_t master_seed,
           int point_index) { return build_cache(cfg, scheme, master_seed, point_index); },
        py::arg("cfg"), py::arg("scheme"), py::arg("master_seed"),
        py::arg("point_index") = 0);

  py::class_<TrialResult>(m, "TrialResult")
      .def_readonly("scheme", &TrialResult::scheme)
      .def_readonly("seed", &TrialResult::seed)
      .def_readonly("cache_capacity_bits", &TrialResult::cache_capacity_bits)
      .def_readonly("feasible", &TrialResult::feasible)
      .def_readonly("outage", &TrialResult::outage)
      .def_readonly("audit_ok", &TrialResult::audit_ok)
      .def_readonly("total_power_w", &TrialResult::total_power_w)
      .def_readonly("sdp_objective_w", &TrialResult::sdp_objective_w)
      .def_readonly("per_bs_power", &TrialResult::per_bs_power)
      .def_readonly("avg_coop_bs", &TrialResult::avg_coop_bs)
      .def_readonly("lr_rates", &TrialResult::lr_rates)
      .def_readonly("worst_case_er", &TrialResult::worst_case_er)
      .def_readonly("min_secrecy_rate", &TrialResult::min_secrecy_rate)
      .def_readonly("max_rank_ratio", &TrialResult::max_rank_ratio)
      .def_readonly("removals", &TrialResult::removals)
      .def_readonly("candidate_solves", &TrialResult::candidate_solves)
      .def_readonly("message", &TrialResult::message);

  m.def("run_delivery_trial",
        [](const SystemConfig& cfg, const CacheMatrix& cache, DeliveryScheme scheme,
           std::uint64_t seed) { return run_delivery_trial(cfg, cache, scheme, seed); },
        py::arg("cfg"), py::arg("cache"), py::arg("scheme"), py::arg("seed"));
  m.def("secrecy_outage_probability", &secrecy_outage_probability, py::arg("trials"));

  // ---- sweeps and reporting -------------------------------------------------
  py::class_<SweepRow>(m, "SweepRow")
      .def_readonly("swept_value", &SweepRow::swept_value)
      .def_readonly("scheme", &SweepRow::scheme)
      .def_readonly("n_trials", &SweepRow::n_trials)
      .def_readonly("n_feasible", &SweepRow::n_feasible)
      .def_readonly("avg_power_w", &SweepRow::avg_power_w)
      .def_readonly("avg_power_dbm", &SweepRow::avg_power_dbm)
      .def_readonly("p_out", &SweepRow::p_out)
      .def_readonly("avg_coop_bs", &SweepRow::avg_coop_bs)
      .def_readonly("master_seed", &SweepRow::master_seed)
      .def_readonly("trained", &SweepRow::trained);

  m.def("run_cache_sweep",
        [](const SystemConfig& cfg, CachingScheme caching, DeliveryScheme delivery,
           const std::vector<double>& grid, int n_trials, std::uint64_t master_seed) {
          return run_cache_sweep(cfg, caching, delivery, grid, n_trials, master_seed);
        },
        py::arg("cfg"), py::arg("caching"), py::arg("delivery"), py::arg("grid"),
        py::arg("n_trials"), py::arg("master_seed"));
  m.def("run_csi_error_sweep",
        [](const SystemConfig& cfg, CachingScheme caching, DeliveryScheme delivery,
           const std::vector<double>& grid, int n_trials, std::uint64_t master_seed) {
          return run_csi_error_sweep(cfg, caching, delivery, grid, n_trials, master_seed);
        },
        py::arg("cfg"), py::arg("caching"), py::arg("delivery"), py::arg("grid"),
        py::arg("n_trials"), py::arg("master_seed"));
  m.def("run_antenna_sweep",
        [](const SystemConfig& cfg, CachingScheme caching, DeliveryScheme delivery,
           const std::vector<double>& grid, int n_trials, std::uint64_t master_seed) {
          return run_antenna_sweep(cfg, caching, delivery, grid, n_trials, master_seed);
        },
        py::arg("cfg"), py::arg("caching"), py::arg("delivery"), py::arg("grid"),
        py::arg("n_trials"), py::arg("master_seed"));

  m.def("watts_to_dbm", &watts_to_dbm, py::arg("watts"));
  m.def("csv_text", &csv_text, py::arg("rows"));
  m.def("write_csv", &write_csv, py::arg("rows"), py::arg("path"));

  // ---- ground-truth rate evaluation ----------------------------------------
  m.def("er_capacity", &er_capacity, py::arg("g"), py::arg("w"), py::arg("v"));
  m.def("worst_case_er_rate", &worst_case_er_rate, py::arg("ghat"), py::arg("eps"),
        py::arg("w"), py::arg("v"), py::arg("n_samples"), py::arg("seed"),
        py::arg("refine") = true);
}
