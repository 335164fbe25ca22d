// Command-line front end: simulation, fitting, calibration, TOF tables,
// sensitive-area scans, and full scenario reproduction runs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ionsim/coincidence.hpp"
#include "ionsim/config.hpp"
#include "ionsim/ionization.hpp"
#include "ionsim/montecarlo.hpp"
#include "ionsim/physcore.hpp"
#include "ionsim/report.hpp"
#include "ionsim/scanmap.hpp"
#include "ionsim/tof.hpp"

namespace {

namespace fs = std::filesystem;
using ionsim::phys::ns_to_s;
using ionsim::phys::s_to_ns;

struct CommonArgs {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
};

ionsim::report::Scenario load(const CommonArgs& args) {
  if (args.config.empty()) throw ionsim::ConfigError("--config is required");
  auto scenario = ionsim::report::load_scenario(args.config);
  if (args.seed) scenario.mc_signal.seed = *args.seed;
  return scenario;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", args.config, "scenario config file");
  if (needs_config) opt->required();
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--seed", args.seed, "override the scenario RNG seed");
}

int cmd_simulate(const CommonArgs& args) {
  const auto scenario = load(args);
  fs::create_directories(args.out);
  auto cfg = scenario.mc_signal;
  if (scenario.mc_dt_from_tof) {
    const auto geom = ionsim::tof::calibrate_cem(scenario.geometry, scenario.geometry.u_acc,
                                                 scenario.tof_dt_anchor,
                                                 scenario.tof_t_e_anchor);
    cfg.dt_mean = ionsim::tof::tof_difference(geom, ionsim::tof::Fragment::rb87_ion(),
                                              ionsim::tof::Fragment::electron());
  }
  const auto signal = ionsim::mc::generate(cfg);
  const auto background = ionsim::mc::generate_background(
      cfg, scenario.mc_background_duration, cfg.seed + 1);
  ionsim::mc::save_stream_csv(fs::path(args.out) / "signal.csv", signal);
  ionsim::mc::save_stream_csv(fs::path(args.out) / "background.csv", background);

  // Matching first-experiment dataset for the fit subcommand.
  const ionsim::ion::IonizationModel model(scenario.ion_p_inf, scenario.ion_tau);
  std::vector<double> grid = scenario.ion_fit_grid;
  grid.insert(grid.end(), scenario.ion_plateau_grid.begin(),
              scenario.ion_plateau_grid.end());
  const auto f2 = ionsim::ion::sample_dataset(model, grid, scenario.ion_trials, cfg.seed);
  const auto f1 =
      ionsim::ion::sample_flat_dataset(scenario.ion_p_f1, grid, scenario.ion_trials,
                                       cfg.seed + 2, ionsim::ion::PreparedState::F1);
  ionsim::ion::save_datasets_csv(fs::path(args.out) / "ionization.csv", {f2, f1});

  std::printf("signal: %zu hits, background: %zu hits -> %s\n", signal.hits.size(),
              background.hits.size(), args.out.c_str());
  return 0;
}

int cmd_fit(const std::string& data_path, double t_max_ns, double p_f1, bool weighted,
            bool joint, const std::string& out_json) {
  const auto datasets = ionsim::ion::load_datasets_csv(data_path);
  const ionsim::ion::IonizationDataset* f2 = nullptr;
  for (const auto& ds : datasets)
    if (ds.prepared_state == ionsim::ion::PreparedState::F2) f2 = &ds;
  if (!f2) throw ionsim::ValidationError("fit: no F2 series in " + data_path);

  const double t_max = ns_to_s(t_max_ns);
  const auto p_inf = ionsim::ion::estimate_p_inf(*f2, t_max);
  ionsim::ion::FitOptions options;
  options.weighted = weighted;
  options.joint_p_inf = joint;
  const auto fit = ionsim::ion::fit_tau(*f2, p_inf.value, t_max, options);
  const ionsim::ion::IonizationModel model(fit.p_inf, fit.tau);
  const double t_ion = ionsim::ion::ionization_time(model);
  const double p_f2 = ionsim::ion::ionization_probability(model, t_ion);

  nlohmann::json doc;
  doc["p_inf"] = p_inf.value;
  doc["p_inf_err"] = p_inf.std_error;
  doc["tau_ns"] = s_to_ns(fit.tau);
  doc["tau_err_ns"] = s_to_ns(fit.std_error);
  doc["points_used"] = fit.points_used;
  doc["t_ion_ns"] = s_to_ns(t_ion);
  doc["p_ion_f2_at_t_ion"] = p_f2;
  doc["fidelity"] = ionsim::ion::readout_fidelity({p_f2, p_f1});
  const std::string text = doc.dump(2) + "\n";
  if (out_json.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    std::ofstream out(out_json);
    out << text;
  }
  return 0;
}

int cmd_calibrate(const std::string& signal_path, const std::string& background_path,
                  double signal_duration_s, double background_duration_s,
                  double window_before_ns, double window_after_ns, double bin_ns,
                  double span_min_ns, double span_max_ns, const std::string& out_dir) {
  auto signal = ionsim::mc::load_stream_csv(signal_path);
  auto background = ionsim::mc::load_stream_csv(background_path);
  background.kind = ionsim::mc::RunKind::background;
  if (signal_duration_s > 0) signal.live_time = signal_duration_s;
  if (background_duration_s > 0) background.live_time = background_duration_s;

  ionsim::coinc::HistogramOptions hist_opts;
  hist_opts.bin_width = ns_to_s(bin_ns);
  hist_opts.span_min = ns_to_s(span_min_ns);
  hist_opts.span_max = ns_to_s(span_max_ns);
  const auto hist = ionsim::coinc::histogram(signal, hist_opts);
  const auto peak = ionsim::coinc::fit_peak(hist);
  const ionsim::coinc::WindowRule rule{ns_to_s(window_before_ns), ns_to_s(window_after_ns)};
  const auto counts = ionsim::coinc::count_window(signal, background, peak, rule);
  const auto eff = ionsim::coinc::efficiencies(counts);
  const auto acc = ionsim::coinc::accidental_ratio(counts, signal.live_time);

  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "histogram.csv");
    out << "bin_center_ns,counts\n";
    char buf[64];
    for (std::size_t i = 0; i < hist.bins(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", s_to_ns(hist.bin_center(i)),
                    hist.counts[i]);
      out << buf;
    }
  }
  nlohmann::json doc;
  doc["counts"] = {{"n_ion", counts.n_ion},
                   {"n_electron", counts.n_electron},
                   {"n_bg_ion", counts.n_bg_ion},
                   {"n_bg_electron", counts.n_bg_electron},
                   {"n_coinc", counts.n_coinc},
                   {"bg_scale", counts.bg_scale},
                   {"corrected_ion", counts.corrected_ion()},
                   {"corrected_electron", counts.corrected_electron()}};
  doc["window"] = {{"lo_ns", s_to_ns(counts.window_lo)},
                   {"hi_ns", s_to_ns(counts.window_hi)}};
  doc["peak"] = {{"center_ns", s_to_ns(peak.center)},
                 {"center_err_ns", s_to_ns(peak.center_err)},
                 {"sigma_ns", s_to_ns(peak.sigma)},
                 {"fwhm_ns", s_to_ns(peak.fwhm())},
                 {"chi2_reduced", peak.chi2_reduced}};
  doc["efficiencies"] = {{"eta_i", eff.eta_ion.value},
                         {"eta_i_err", eff.eta_ion.error},
                         {"eta_i_err_cond", eff.eta_ion_err_cond},
                         {"eta_e", eff.eta_electron.value},
                         {"eta_e_err", eff.eta_electron.error},
                         {"eta_e_err_cond", eff.eta_electron_err_cond},
                         {"eta_det", eff.eta_det.value},
                         {"eta_det_err", eff.eta_det.error},
                         {"eta_det_err_cond", eff.eta_det_err_cond}};
  doc["accidentals"] = {{"n_expected", acc.n_expected},
                        {"ratio", acc.ratio},
                        {"n_expected_bg", acc.n_expected_bg},
                        {"ratio_bg", acc.ratio_bg}};
  if (signal.has_truth)
    doc["truth_coincidences"] =
        ionsim::coinc::truth_coincidences(signal, counts.window_lo, counts.window_hi);
  std::ofstream out(fs::path(out_dir) / "calibration.json");
  out << doc.dump(2) << "\n";
  std::printf("eta_i=%.4f eta_e=%.4f eta_det=%.4f -> %s\n", eff.eta_ion.value,
              eff.eta_electron.value, eff.eta_det.value, out_dir.c_str());
  return 0;
}

int cmd_tof(const CommonArgs& args, const std::vector<double>& extra_voltages) {
  const auto scenario = load(args);
  const auto geom = ionsim::tof::calibrate_cem(scenario.geometry, scenario.geometry.u_acc,
                                               scenario.tof_dt_anchor,
                                               scenario.tof_t_e_anchor);
  std::vector<double> voltages =
      extra_voltages.empty() ? scenario.tof_curve_voltages : extra_voltages;
  const auto curve = ionsim::tof::dt_curve(geom, ionsim::tof::Fragment::rb87_ion(),
                                           ionsim::tof::Fragment::electron(), voltages);
  fs::create_directories(args.out);
  std::ofstream out(fs::path(args.out) / "tof_curve.csv");
  out << "U_acc_V,t_i_ns,t_e_ns,dt_ns,t_det_ns\n";
  char buf[160];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g\n", p.u_acc,
                  s_to_ns(p.t_ion), s_to_ns(p.t_electron), s_to_ns(p.dt),
                  s_to_ns(p.t_det));
    out << buf;
    if (!p.model_valid)
      std::fprintf(stderr, "warning: %.0f V is below the model validity range (1.6 kV)\n",
                   p.u_acc);
  }
  std::printf("%zu voltages -> %s\n", curve.size(), args.out.c_str());
  return 0;
}

int cmd_scan(const CommonArgs& args) {
  const auto scenario = load(args);
  fs::create_directories(args.out);
  const auto ion_map = ionsim::scan::synth_map(scenario.scan_ion_model, scenario.scan_grid);
  const auto electron_map =
      ionsim::scan::synth_map(scenario.scan_electron_model, scenario.scan_grid);
  auto det_map = ion_map;
  for (std::size_t i = 0; i < det_map.eta.size(); ++i) {
    const double ei = ion_map.eta[i], ee = electron_map.eta[i];
    det_map.eta[i] = ee + ei - ei * ee;
  }
  ionsim::scan::save_map_csv(fs::path(args.out) / "map_ion.csv", ion_map);
  ionsim::scan::save_map_csv(fs::path(args.out) / "map_electron.csv", electron_map);
  ionsim::scan::save_map_csv(fs::path(args.out) / "map_det.csv", det_map);
  {
    std::ofstream out(fs::path(args.out) / "line_scan_det.csv");
    out << "x_mm,eta,sigma\n";
    char buf[96];
    for (const auto& p : ionsim::scan::line_scan(det_map, ionsim::scan::Axis::x,
                                                 scenario.scan_line_offset)) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n",
                    ionsim::phys::m_to_mm(p.position), p.eta, p.sigma);
      out << buf;
    }
  }
  const auto dia =
      ionsim::scan::sensitive_diameter_detail(det_map, scenario.scan_threshold);
  nlohmann::json doc;
  doc["threshold"] = scenario.scan_threshold;
  doc["sensitive_diameter_mm"] = ionsim::phys::m_to_mm(dia.containment);
  doc["equivalent_area_diameter_mm"] = ionsim::phys::m_to_mm(dia.equivalent_area);
  doc["points_above"] = dia.points_above;
  doc["center_x_mm"] = ionsim::phys::m_to_mm(dia.center_x);
  doc["center_y_mm"] = ionsim::phys::m_to_mm(dia.center_y);
  std::ofstream out(fs::path(args.out) / "scan_summary.json");
  out << doc.dump(2) << "\n";
  std::printf("sensitive diameter %.3f mm (threshold %.3f) -> %s\n",
              ionsim::phys::m_to_mm(dia.containment), scenario.scan_threshold,
              args.out.c_str());
  return 0;
}

int cmd_report(const CommonArgs& args) {
  const auto scenario = load(args);
  const auto rep = ionsim::report::run_scenario(scenario, args.out);
  for (const auto& rec : rep.claims) {
    const std::string note = rec.note.empty() ? "" : " (" + rec.note + ")";
    std::printf("%-4s %-28s computed=%.6g expected=%.6g tol=%.3g%s\n",
                rec.pass ? "PASS" : "FAIL", rec.claim.id.c_str(), rec.computed,
                rec.claim.expected, rec.claim.tolerance, note.c_str());
  }
  std::printf("%s: %zu claims, %s\n", args.out.c_str(), rep.claims.size(),
              rep.all_pass ? "all pass" : "FAILURES");
  return rep.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photoionization detection simulator and calibration toolkit"};
  app.require_subcommand(1);

  CommonArgs sim_args, tof_args, scan_args, report_args;
  std::string fit_data, fit_out;
  double fit_t_max_ns = 475.0, fit_p_f1 = 0.0068;
  bool fit_weighted = false, fit_joint = false;
  std::string cal_signal, cal_background, cal_out = ".";
  double cal_sig_dur = 0.0, cal_bg_dur = 0.0;
  double cal_before = 20.0, cal_after = 80.0, cal_bin = 1.0;
  double cal_span_min = 0.0, cal_span_max = 1000.0;
  std::vector<double> tof_voltages;

  auto* sim = app.add_subcommand("simulate", "generate signal and background event streams");
  add_common(sim, sim_args);

  auto* fit = app.add_subcommand("fit", "fit tau and p_inf to an ionization CSV");
  fit->add_option("--data", fit_data, "ionization dataset CSV")->required();
  fit->add_option("--t-max-ns", fit_t_max_ns, "fit limit; plateau average above it");
  fit->add_option("--p-f1", fit_p_f1, "F=1 ionization probability for the fidelity");
  fit->add_flag("--weighted", fit_weighted, "inverse-variance weights");
  fit->add_flag("--joint", fit_joint, "fit p_inf jointly with tau");
  fit->add_option("--out", fit_out, "write JSON here instead of stdout");

  auto* cal = app.add_subcommand("calibrate", "coincidence calibration from event CSVs");
  cal->add_option("--signal", cal_signal, "signal run CSV")->required();
  cal->add_option("--background", cal_background, "laser-off run CSV")->required();
  cal->add_option("--signal-duration-s", cal_sig_dur, "override signal live time");
  cal->add_option("--background-duration-s", cal_bg_dur, "override background live time");
  cal->add_option("--window-before-ns", cal_before, "window start before the peak");
  cal->add_option("--window-after-ns", cal_after, "window end after the peak");
  cal->add_option("--bin-ns", cal_bin, "histogram bin width");
  cal->add_option("--span-min-ns", cal_span_min, "histogram span start");
  cal->add_option("--span-max-ns", cal_span_max, "histogram span end");
  cal->add_option("--out", cal_out, "output directory");

  auto* tofc = app.add_subcommand("tof", "tabulate flight times vs acceleration voltage");
  add_common(tofc, tof_args);
  tofc->add_option("--u-acc", tof_voltages, "voltages [V]; default from the scenario");

  auto* scan = app.add_subcommand("scan", "synthesize sensitive-area maps and line scans");
  add_common(scan, scan_args);

  auto* rep = app.add_subcommand("report", "run the full scenario and evaluate claims");
  add_common(rep, report_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (fit->parsed())
      return cmd_fit(fit_data, fit_t_max_ns, fit_p_f1, fit_weighted, fit_joint, fit_out);
    if (cal->parsed())
      return cmd_calibrate(cal_signal, cal_background, cal_sig_dur, cal_bg_dur,
                           cal_before, cal_after, cal_bin, cal_span_min, cal_span_max,
                           cal_out);
    if (tofc->parsed()) return cmd_tof(tof_args, tof_voltages);
    if (scan->parsed()) return cmd_scan(scan_args);
    if (rep->parsed()) return cmd_report(report_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
