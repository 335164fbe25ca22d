#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ionsim/coincidence.hpp"
#include "ionsim/config.hpp"
#include "ionsim/ionization.hpp"
#include "ionsim/montecarlo.hpp"
#include "ionsim/scanmap.hpp"
#include "ionsim/tof.hpp"

namespace ionsim::report {

struct Claim {
  std::string id;
  std::string description;
  std::string metric;      // key into the computed metrics
  std::string provenance;  // exact-arithmetic | monte-carlo | model-calibration
  double expected = 0.0;
  double tolerance = 0.0;
};

std::vector<Claim> load_claims(const std::filesystem::path& path);

struct ClaimRecord {
  Claim claim;
  double computed = 0.0;
  bool pass = false;
  std::string note;  // set when the metric could not be evaluated
};

struct ReproductionReport {
  std::map<std::string, double> metrics;
  std::vector<ClaimRecord> claims;
  bool all_pass = false;
  std::map<std::string, std::string> scenario_echo;

  std::string to_json() const;  // deterministic serialization
};

// Full experiment description wired from a flat config file.
struct Scenario {
  // ionization
  double ion_p_inf = 0.993;
  double ion_tau = 64.4e-9;           // s
  double ion_p_f1 = 0.0068;
  double ion_p_f2_ref = 0.9905;       // measured working-point value
  std::uint64_t ion_trials = 300;
  std::vector<double> ion_fit_grid;   // s
  std::vector<double> ion_plateau_grid;
  double ion_fit_t_max = 475e-9;
  std::uint64_t ion_noiseless_trials = 10000000000ULL;
  double coverage_band = 3e-9;        // s

  // tof
  tof::DetectorGeometry geometry;
  double tof_dt_anchor = 388.81e-9;
  double tof_t_e_anchor = 0.95e-9;
  std::vector<double> tof_curve_voltages;

  // montecarlo + coincidence
  mc::ScenarioConfig mc_signal;
  bool mc_dt_from_tof = true;  // derive dt_mean from the calibrated model
  double mc_background_duration = 60.0;
  coinc::HistogramOptions hist;
  coinc::WindowRule window;

  // published counts for the exact-arithmetic claims
  std::uint64_t counts_n_ion = 0;
  std::uint64_t counts_n_bg_ion = 0;
  std::uint64_t counts_n_electron = 0;
  std::uint64_t counts_n_bg_electron = 0;
  std::uint64_t counts_n_coinc = 0;

  // efficiency-vs-voltage curve
  std::vector<double> curve_voltages;
  std::vector<double> curve_eta_ion;
  std::vector<double> curve_eta_electron;
  double curve_duration = 10.0;

  // sensitive-area scan
  scan::GridSpec scan_grid;
  scan::PlateauModel scan_ion_model;
  scan::PlateauModel scan_electron_model;
  double scan_threshold = 0.988;
  double scan_line_offset = 0.0;
  double scan_gain_voltage = 0.0;

  int bias_runs = 200;
  int coverage_runs = 100;
  bool emit_streams = false;

  std::filesystem::path claims_file;
  std::map<std::string, std::string> config_echo;

  static Scenario from_config(const Config& config,
                              const std::filesystem::path& base_dir);
};

Scenario load_scenario(const std::filesystem::path& config_path);

// Runs the full pipeline, writes plot-data artifacts and report.json into
// out_dir, and evaluates every claim. Deterministic for a fixed seed.
ReproductionReport run_scenario(const Scenario& scenario,
                                const std::filesystem::path& out_dir);

}  // namespace ionsim::report
