#include "ionsim/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ionsim/parallel.hpp"
#include "ionsim/physcore.hpp"

namespace ionsim::report {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t subseed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64((seed + 0x51CE) ^ stream) ^ index);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "ion.p_inf", "ion.tau_ns", "ion.p_ion_f1", "ion.p_ion_f2_ref",
      "ion.trials_per_point", "ion.fit_grid_ns", "ion.plateau_grid_ns",
      "ion.fit_t_max_ns", "ion.noiseless_trials",
      "tof.gap_mm", "tof.z0_fraction", "tof.u_acc_v", "tof.transit_ns",
      "tof.l_cem_ion_mm", "tof.l_cem_electron_mm", "tof.dt_anchor_ns",
      "tof.t_e_anchor_ns", "tof.curve_u_v",
      "mc.duration_s", "mc.background_duration_s", "mc.rate_pair_hz",
      "mc.eta_ion_true", "mc.eta_electron_true", "mc.rate_bg_ion_hz",
      "mc.rate_bg_electron_hz", "mc.rate_dark_ion_hz", "mc.rate_dark_electron_hz",
      "mc.dt_mean_ns", "mc.t_electron_ns", "mc.peak_fwhm_ns",
      "mc.jitter_electron_share", "mc.tail_fraction", "mc.tail_tau_ns", "mc.seed",
      "mc.workers",
      "coinc.bin_ns", "coinc.span_min_ns", "coinc.span_max_ns",
      "coinc.window_before_ns", "coinc.window_after_ns",
      "counts.n_ion", "counts.n_bg_ion", "counts.n_electron",
      "counts.n_bg_electron", "counts.n_coinc",
      "curve.u_v", "curve.eta_ion", "curve.eta_electron", "curve.duration_s",
      "scan.step_mm", "scan.x_min_mm", "scan.x_max_mm", "scan.y_min_mm",
      "scan.y_max_mm", "scan.center_x_mm", "scan.center_y_mm", "scan.order",
      "scan.eta_ion_max", "scan.eta_electron_max", "scan.d1e_mm", "scan.threshold",
      "scan.line_offset_mm", "scan.gain_v",
      "report.bias_runs", "report.coverage_runs", "report.coverage_band_ns",
      "report.emit_streams", "report.claims_file",
  };
  return keys;
}

std::vector<double> ns_list_to_s(std::vector<double> v) {
  for (double& x : v) x = phys::ns_to_s(x);
  return v;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

std::string fmt(const char* format, double a, double b = 0, double c = 0, double d = 0,
                double e = 0, double f = 0, double g = 0, double h = 0, double i = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, a, b, c, d, e, f, g, h, i);
  return buf;
}

}  // namespace

std::vector<Claim> load_claims(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open claims file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ConfigError("claims file " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ConfigError("claims file must hold an array of claims");
  std::vector<Claim> out;
  std::set<std::string> seen;
  for (const auto& item : doc) {
    Claim c;
    try {
      c.id = item.at("id").get<std::string>();
      c.description = item.value("description", std::string{});
      c.metric = item.at("metric").get<std::string>();
      c.provenance = item.value("provenance", std::string{"unspecified"});
      c.expected = item.at("expected").get<double>();
      c.tolerance = item.at("tolerance").get<double>();
    } catch (const std::exception& e) {
      throw ConfigError("claims file: malformed claim: " + std::string(e.what()));
    }
    if (!seen.insert(c.id).second) throw ConfigError("claims file: duplicate id " + c.id);
    out.push_back(std::move(c));
  }
  return out;
}

Scenario Scenario::from_config(const Config& cfg, const std::filesystem::path& base_dir) {
  cfg.require_known(known_keys());
  Scenario s;
  s.config_echo = cfg.entries();

  s.ion_p_inf = cfg.get_double("ion.p_inf", s.ion_p_inf);
  s.ion_tau = phys::ns_to_s(cfg.get_double("ion.tau_ns", phys::s_to_ns(s.ion_tau)));
  s.ion_p_f1 = cfg.get_double("ion.p_ion_f1", s.ion_p_f1);
  s.ion_p_f2_ref = cfg.get_double("ion.p_ion_f2_ref", s.ion_p_f2_ref);
  s.ion_trials = cfg.get_u64("ion.trials_per_point", s.ion_trials);
  s.ion_fit_grid = ns_list_to_s(cfg.get_list("ion.fit_grid_ns"));
  s.ion_plateau_grid = ns_list_to_s(cfg.get_list("ion.plateau_grid_ns"));
  s.ion_fit_t_max =
      phys::ns_to_s(cfg.get_double("ion.fit_t_max_ns", phys::s_to_ns(s.ion_fit_t_max)));
  s.ion_noiseless_trials = cfg.get_u64("ion.noiseless_trials", s.ion_noiseless_trials);
  s.coverage_band = phys::ns_to_s(cfg.get_double("report.coverage_band_ns", 3.0));

  s.geometry.gap = phys::mm_to_m(cfg.get_double("tof.gap_mm", 15.7));
  s.geometry.ionization_z = s.geometry.gap * cfg.get_double("tof.z0_fraction", 0.5);
  s.geometry.u_acc = cfg.get_double("tof.u_acc_v", 3800.0);
  s.geometry.transit_time = phys::ns_to_s(cfg.get_double("tof.transit_ns", 26.0));
  s.geometry.ion_cem.length = phys::mm_to_m(cfg.get_double("tof.l_cem_ion_mm", 9.5));
  s.geometry.electron_cem.length =
      phys::mm_to_m(cfg.get_double("tof.l_cem_electron_mm", 10.0));
  s.tof_dt_anchor = phys::ns_to_s(cfg.get_double("tof.dt_anchor_ns", 388.81));
  s.tof_t_e_anchor = phys::ns_to_s(cfg.get_double("tof.t_e_anchor_ns", 0.95));
  s.tof_curve_voltages = cfg.get_list("tof.curve_u_v");

  auto& m = s.mc_signal;
  m.duration = cfg.get_double("mc.duration_s", 60.0);
  m.rate_pair = cfg.get_double("mc.rate_pair_hz", 0.0);
  m.eta_ion = cfg.get_double("mc.eta_ion_true", 1.0);
  m.eta_electron = cfg.get_double("mc.eta_electron_true", 1.0);
  m.rate_bg_ion = cfg.get_double("mc.rate_bg_ion_hz", 0.0);
  m.rate_bg_electron = cfg.get_double("mc.rate_bg_electron_hz", 0.0);
  m.rate_dark_ion = cfg.get_double("mc.rate_dark_ion_hz", 0.0);
  m.rate_dark_electron = cfg.get_double("mc.rate_dark_electron_hz", 0.0);
  s.mc_dt_from_tof = !cfg.has("mc.dt_mean_ns");
  if (!s.mc_dt_from_tof) m.dt_mean = phys::ns_to_s(cfg.get_double("mc.dt_mean_ns"));
  m.t_electron = phys::ns_to_s(cfg.get_double("mc.t_electron_ns", 0.95));
  m.peak_fwhm = phys::ns_to_s(cfg.get_double("mc.peak_fwhm_ns", 8.5));
  m.jitter_electron_share = cfg.get_double("mc.jitter_electron_share", 0.0);
  m.tail_fraction = cfg.get_double("mc.tail_fraction", 0.02);
  m.tail_tau = phys::ns_to_s(cfg.get_double("mc.tail_tau_ns", 20.0));
  m.seed = cfg.get_u64("mc.seed", 1);
  m.workers = cfg.get_int("mc.workers", 1);
  s.mc_background_duration = cfg.get_double("mc.background_duration_s", m.duration);

  s.hist.bin_width = phys::ns_to_s(cfg.get_double("coinc.bin_ns", 1.0));
  s.hist.span_min = phys::ns_to_s(cfg.get_double("coinc.span_min_ns", 0.0));
  s.hist.span_max = phys::ns_to_s(cfg.get_double("coinc.span_max_ns", 1000.0));
  s.window.before = phys::ns_to_s(cfg.get_double("coinc.window_before_ns", 20.0));
  s.window.after = phys::ns_to_s(cfg.get_double("coinc.window_after_ns", 80.0));

  s.counts_n_ion = cfg.get_u64("counts.n_ion", 0);
  s.counts_n_bg_ion = cfg.get_u64("counts.n_bg_ion", 0);
  s.counts_n_electron = cfg.get_u64("counts.n_electron", 0);
  s.counts_n_bg_electron = cfg.get_u64("counts.n_bg_electron", 0);
  s.counts_n_coinc = cfg.get_u64("counts.n_coinc", 0);

  if (cfg.has("curve.u_v")) {
    s.curve_voltages = cfg.get_list("curve.u_v");
    s.curve_eta_ion = cfg.get_list("curve.eta_ion");
    s.curve_eta_electron = cfg.get_list("curve.eta_electron");
    if (s.curve_eta_ion.size() != s.curve_voltages.size() ||
        s.curve_eta_electron.size() != s.curve_voltages.size())
      throw ConfigError("curve.eta_ion/curve.eta_electron: length mismatch with curve.u_v");
    s.curve_duration = cfg.get_double("curve.duration_s", 10.0);
  }

  const double step = phys::mm_to_m(cfg.get_double("scan.step_mm", 0.02));
  const double x_min = phys::mm_to_m(cfg.get_double("scan.x_min_mm", -1.2));
  const double x_max = phys::mm_to_m(cfg.get_double("scan.x_max_mm", 1.2));
  const double y_min = phys::mm_to_m(cfg.get_double("scan.y_min_mm", -1.2));
  const double y_max = phys::mm_to_m(cfg.get_double("scan.y_max_mm", 1.2));
  s.scan_grid.x0 = x_min;
  s.scan_grid.y0 = y_min;
  s.scan_grid.step = step;
  s.scan_grid.nx = static_cast<std::size_t>(std::floor((x_max - x_min) / step)) + 1;
  s.scan_grid.ny = static_cast<std::size_t>(std::floor((y_max - y_min) / step)) + 1;
  const double cx = phys::mm_to_m(cfg.get_double("scan.center_x_mm", 0.0));
  const double cy = phys::mm_to_m(cfg.get_double("scan.center_y_mm", 0.0));
  const double order = cfg.get_double("scan.order", 8.0);
  const double d1e = phys::mm_to_m(cfg.get_double("scan.d1e_mm", 1.4));
  s.scan_ion_model = {cfg.get_double("scan.eta_ion_max", 0.926), d1e, order, cx, cy};
  s.scan_electron_model = {cfg.get_double("scan.eta_electron_max", 0.875), d1e, order,
                           cx, cy};
  s.scan_threshold = cfg.get_double("scan.threshold", 0.988);
  s.scan_line_offset = phys::mm_to_m(cfg.get_double("scan.line_offset_mm", cy * 1e3));
  s.scan_gain_voltage = cfg.get_double("scan.gain_v", 0.0);

  s.bias_runs = cfg.get_int("report.bias_runs", 200);
  s.coverage_runs = cfg.get_int("report.coverage_runs", 100);
  s.emit_streams = cfg.get_bool("report.emit_streams", false);
  if (cfg.has("report.claims_file")) {
    std::filesystem::path p = cfg.get_string("report.claims_file");
    s.claims_file = p.is_absolute() ? p : base_dir / p;
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& config_path) {
  const Config cfg = Config::from_file(config_path);
  return Scenario::from_config(cfg, config_path.parent_path());
}

namespace {

struct EstimatedRun {
  coinc::EfficiencyResult eff;
  coinc::CountSummary counts;
  coinc::PeakFit peak;
};

EstimatedRun estimate_run(const mc::ScenarioConfig& cfg, double bg_duration,
                          std::uint64_t bg_seed, const coinc::HistogramOptions& hist_opts,
                          const coinc::WindowRule& window) {
  EstimatedRun out;
  const mc::EventStream signal = mc::generate(cfg);
  const mc::EventStream background = mc::generate_background(cfg, bg_duration, bg_seed);
  const coinc::TimeDiffHistogram hist = coinc::histogram(signal, hist_opts);
  out.peak = coinc::fit_peak(hist);
  out.counts = coinc::count_window(signal, background, out.peak, window);
  out.eff = coinc::efficiencies(out.counts);
  return out;
}

}  // namespace

ReproductionReport run_scenario(const Scenario& s, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ReproductionReport rep;
  rep.scenario_echo = s.config_echo;
  auto& met = rep.metrics;
  const std::uint64_t seed = s.mc_signal.seed;

  // --- exact arithmetic on the published counts -------------------------
  if (s.counts_n_coinc > 0) {
    const auto counts = coinc::make_summary(
        s.counts_n_ion, s.counts_n_bg_ion, s.counts_n_electron, s.counts_n_bg_electron,
        s.counts_n_coinc, 0.0, s.window.before + s.window.after);
    const auto eff = coinc::efficiencies(counts);
    met["exact.eta_i"] = eff.eta_ion.value;
    met["exact.eta_e"] = eff.eta_electron.value;
    met["exact.eta_det"] = eff.eta_det.value;
    met["exact.eta_i_err"] = eff.eta_ion.error;
    met["exact.eta_e_err"] = eff.eta_electron.error;
    met["exact.eta_det_err"] = eff.eta_det.error;
    met["exact.eta_i_err_cond"] = eff.eta_ion_err_cond;
    met["exact.eta_e_err_cond"] = eff.eta_electron_err_cond;
    met["exact.eta_det_err_cond"] = eff.eta_det_err_cond;
    const auto acc = coinc::accidental_ratio(counts, s.mc_signal.duration);
    met["exact.accidental_ratio"] = acc.ratio;
    met["exact.accidental_ratio_bg"] = acc.ratio_bg;
  }

  // --- ionization -------------------------------------------------------
  const ion::IonizationModel model(s.ion_p_inf, s.ion_tau);
  const double t_ion = ion::ionization_time(model);
  const double p_at_t_ion = ion::ionization_probability(model, t_ion);
  met["ionization.t_ion_ns"] = phys::s_to_ns(t_ion);
  met["ionization.p_at_t_ion"] = p_at_t_ion;
  met["ionization.fidelity"] =
      ion::readout_fidelity({s.ion_p_f2_ref, s.ion_p_f1});
  met["ionization.fidelity_model"] = ion::readout_fidelity({p_at_t_ion, s.ion_p_f1});

  {
    const auto noiseless =
        ion::make_noiseless_dataset(model, s.ion_fit_grid, s.ion_noiseless_trials);
    const auto fit = ion::fit_tau(noiseless, s.ion_p_inf, s.ion_fit_t_max);
    met["ionization.tau_fit_noiseless_rel_err"] = std::abs(fit.tau / s.ion_tau - 1.0);
  }

  std::vector<double> full_grid = s.ion_fit_grid;
  full_grid.insert(full_grid.end(), s.ion_plateau_grid.begin(), s.ion_plateau_grid.end());
  std::sort(full_grid.begin(), full_grid.end());
  {
    const auto f2 = ion::sample_dataset(model, full_grid, s.ion_trials, subseed(seed, 2));
    const auto f1 = ion::sample_flat_dataset(s.ion_p_f1, full_grid, s.ion_trials,
                                             subseed(seed, 3), ion::PreparedState::F1);
    const auto p_inf_hat = ion::estimate_p_inf(f2, s.ion_fit_t_max);
    const auto fit = ion::fit_tau(f2, p_inf_hat.value, s.ion_fit_t_max);
    met["ionization.tau_hat_ns"] = phys::s_to_ns(fit.tau);
    met["ionization.tau_se_ns"] = phys::s_to_ns(fit.std_error);
    met["ionization.p_inf_hat"] = p_inf_hat.value;
    met["ionization.p_inf_se"] = p_inf_hat.std_error;

    std::string csv = "t_p_ns,state,trials,ionized,p_observed,p_model\n";
    for (const auto& pt : f2.points)
      csv += fmt("%.9g,F2,%.0f,%.0f,%.9g,%.9g\n", phys::s_to_ns(pt.t_p),
                 static_cast<double>(pt.trials), static_cast<double>(pt.ionized),
                 static_cast<double>(pt.ionized) / static_cast<double>(pt.trials),
                 ion::ionization_probability(model, pt.t_p));
    for (const auto& pt : f1.points)
      csv += fmt("%.9g,F1,%.0f,%.0f,%.9g,%.9g\n", phys::s_to_ns(pt.t_p),
                 static_cast<double>(pt.trials), static_cast<double>(pt.ionized),
                 static_cast<double>(pt.ionized) / static_cast<double>(pt.trials),
                 s.ion_p_f1);
    write_text(out_dir / "ionization_fig2.csv", csv);
  }

  if (s.coverage_runs > 0) {
    std::vector<int> hit(static_cast<std::size_t>(s.coverage_runs), 0);
    parallel_for(hit.size(), s.mc_signal.workers, [&](std::size_t k) {
      const auto ds = ion::sample_dataset(model, full_grid, s.ion_trials,
                                          subseed(seed, 4, k));
      const auto p_inf_hat = ion::estimate_p_inf(ds, s.ion_fit_t_max);
      const auto fit = ion::fit_tau(ds, p_inf_hat.value, s.ion_fit_t_max);
      hit[k] = std::abs(fit.tau - s.ion_tau) <= s.coverage_band ? 1 : 0;
    });
    double covered = 0;
    for (int h : hit) covered += h;
    met["ionization.tau_fit_coverage"] = covered / static_cast<double>(s.coverage_runs);
  }

  // --- time of flight ----------------------------------------------------
  const tof::Fragment rb_ion = tof::Fragment::rb87_ion();
  const tof::Fragment electron = tof::Fragment::electron();
  const tof::DetectorGeometry calibrated =
      tof::calibrate_cem(s.geometry, s.geometry.u_acc, s.tof_dt_anchor, s.tof_t_e_anchor);
  const auto ft_ion = tof::flight_time(calibrated, rb_ion);
  const auto ft_electron = tof::flight_time(calibrated, electron);
  const double dt_model = tof::tof_difference(calibrated, rb_ion, electron);
  const double t_det = tof::detection_time(calibrated, rb_ion, electron);
  met["tof.t_i_ns"] = phys::s_to_ns(ft_ion.total());
  met["tof.t_e_ns"] = phys::s_to_ns(ft_electron.total());
  met["tof.t_i_gap_only_ns"] = phys::s_to_ns(ft_ion.gap);
  met["tof.dt_ns"] = phys::s_to_ns(dt_model);
  met["tof.t_det_ns"] = phys::s_to_ns(t_det);
  met["tof.ion_cem_drop_v"] = calibrated.ion_cem.potential_drop;
  met["tof.electron_cem_drop_v"] = calibrated.electron_cem.potential_drop;

  {
    std::string csv = "U_acc_V,t_i_ns,t_e_ns,dt_ns,t_det_ns\n";
    for (const auto& p :
         tof::dt_curve(calibrated, rb_ion, electron, s.tof_curve_voltages))
      csv += fmt("%.9g,%.9g,%.9g,%.9g,%.9g\n", p.u_acc, phys::s_to_ns(p.t_ion),
                 phys::s_to_ns(p.t_electron), phys::s_to_ns(p.dt),
                 phys::s_to_ns(p.t_det));
    write_text(out_dir / "tof_curve.csv", csv);
  }

  // --- reference Monte Carlo run ------------------------------------------
  mc::ScenarioConfig run_cfg = s.mc_signal;
  if (s.mc_dt_from_tof) run_cfg.dt_mean = dt_model;
  const mc::EventStream signal = mc::generate(run_cfg);
  const mc::EventStream background =
      mc::generate_background(run_cfg, s.mc_background_duration, subseed(seed, 5));
  if (s.emit_streams) {
    mc::save_stream_csv(out_dir / "signal.csv", signal);
    mc::save_stream_csv(out_dir / "background.csv", background);
  }
  const auto hist = coinc::histogram(signal, s.hist);
  const auto peak = coinc::fit_peak(hist);
  const auto counts = coinc::count_window(signal, background, peak, s.window);
  const auto eff = coinc::efficiencies(counts);
  const auto acc = coinc::accidental_ratio(counts, run_cfg.duration);

  met["mc.n_ion"] = static_cast<double>(counts.n_ion);
  met["mc.n_electron"] = static_cast<double>(counts.n_electron);
  met["mc.n_bg_ion"] = counts.n_bg_ion;
  met["mc.n_bg_electron"] = counts.n_bg_electron;
  met["mc.n_coinc"] = static_cast<double>(counts.n_coinc);
  met["mc.eta_i_hat"] = eff.eta_ion.value;
  met["mc.eta_i_err"] = eff.eta_ion.error;
  met["mc.eta_e_hat"] = eff.eta_electron.value;
  met["mc.eta_e_err"] = eff.eta_electron.error;
  met["mc.eta_det_hat"] = eff.eta_det.value;
  met["mc.eta_det_err"] = eff.eta_det.error;
  met["mc.peak_center_ns"] = phys::s_to_ns(peak.center);
  met["mc.peak_center_err_ns"] = phys::s_to_ns(peak.center_err);
  met["mc.peak_center_pull"] =
      std::abs(peak.center - run_cfg.dt_mean) / std::max(peak.center_err, 1e-15);
  met["mc.fwhm_ns"] = phys::s_to_ns(peak.fwhm());
  met["mc.fwhm_rel_err"] = std::abs(peak.fwhm() / run_cfg.peak_fwhm - 1.0);
  met["mc.accidental_ratio"] = acc.ratio;
  met["mc.accidental_ratio_bg"] = acc.ratio_bg;
  met["mc.truth_coinc"] = static_cast<double>(
      coinc::truth_coincidences(signal, counts.window_lo, counts.window_hi));

  {
    std::string csv = "bin_center_ns,counts\n";
    for (std::size_t i = 0; i < hist.bins(); ++i)
      csv += fmt("%.9g,%.9g\n", phys::s_to_ns(hist.bin_center(i)), hist.counts[i]);
    write_text(out_dir / "histogram.csv", csv);
  }

  // --- estimator bias study ------------------------------------------------
  if (s.bias_runs > 0) {
    struct RunResult {
      double eta_i = 0.0, eta_e = 0.0;
    };
    std::vector<RunResult> results(static_cast<std::size_t>(s.bias_runs));
    parallel_for(results.size(), s.mc_signal.workers, [&](std::size_t k) {
      mc::ScenarioConfig cfg = run_cfg;
      cfg.workers = 1;
      cfg.seed = subseed(seed, 6, k);
      const auto run = estimate_run(cfg, s.mc_background_duration, subseed(seed, 7, k),
                                    s.hist, s.window);
      results[k] = {run.eff.eta_ion.value, run.eff.eta_electron.value};
    });
    double sum_i = 0, sum_e = 0;
    for (const auto& r : results) {
      sum_i += r.eta_i;
      sum_e += r.eta_e;
    }
    const auto n = static_cast<double>(results.size());
    const double mean_i = sum_i / n, mean_e = sum_e / n;
    double var_i = 0, var_e = 0;
    for (const auto& r : results) {
      var_i += (r.eta_i - mean_i) * (r.eta_i - mean_i);
      var_e += (r.eta_e - mean_e) * (r.eta_e - mean_e);
    }
    const double sem_i = std::sqrt(var_i / (n - 1.0) / n);
    const double sem_e = std::sqrt(var_e / (n - 1.0) / n);
    met["mc.eta_i_mean"] = mean_i;
    met["mc.eta_e_mean"] = mean_e;
    met["mc.eta_i_sem"] = sem_i;
    met["mc.eta_e_sem"] = sem_e;
    met["mc.eta_i_bias_pull"] = std::abs(mean_i - run_cfg.eta_ion) / sem_i;
    met["mc.eta_e_bias_pull"] = std::abs(mean_e - run_cfg.eta_electron) / sem_e;
  }

  // --- overall figures -------------------------------------------------------
  {
    coinc::EfficiencyResult exact_eff;
    if (s.counts_n_coinc > 0) {
      const auto exact_counts = coinc::make_summary(
          s.counts_n_ion, s.counts_n_bg_ion, s.counts_n_electron,
          s.counts_n_bg_electron, s.counts_n_coinc, 0.0,
          s.window.before + s.window.after);
      exact_eff = coinc::efficiencies(exact_counts);
    } else {
      exact_eff = eff;
    }
    const auto all = coinc::overall(exact_eff, p_at_t_ion, t_ion, t_det);
    met["overall.eta"] = all.eta;
    met["overall.eta_err"] = all.eta_err;
    met["overall.t_tot_ns"] = phys::s_to_ns(all.t_tot);
  }

  // --- efficiency vs acceleration voltage -----------------------------------
  if (!s.curve_voltages.empty()) {
    std::string csv =
        "U_acc_V,eta_i_true,eta_i_hat,eta_i_err,eta_e_true,eta_e_hat,eta_e_err,"
        "eta_det_hat,eta_det_err\n";
    tof::DetectorGeometry g = calibrated;
    std::vector<std::string> rows(s.curve_voltages.size());
    std::vector<double> dts(s.curve_voltages.size());
    for (std::size_t k = 0; k < s.curve_voltages.size(); ++k) {
      g.u_acc = s.curve_voltages[k];
      dts[k] = tof::tof_difference(g, rb_ion, electron);
    }
    parallel_for(rows.size(), s.mc_signal.workers, [&](std::size_t k) {
      mc::ScenarioConfig cfg = run_cfg;
      cfg.workers = 1;
      cfg.duration = s.curve_duration;
      cfg.eta_ion = s.curve_eta_ion[k];
      cfg.eta_electron = s.curve_eta_electron[k];
      cfg.dt_mean = dts[k];
      cfg.seed = subseed(seed, 8, k);
      const auto run = estimate_run(cfg, s.curve_duration, subseed(seed, 9, k), s.hist,
                                    s.window);
      rows[k] = fmt("%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                    s.curve_voltages[k], cfg.eta_ion, run.eff.eta_ion.value,
                    run.eff.eta_ion.error, cfg.eta_electron,
                    run.eff.eta_electron.value, run.eff.eta_electron.error,
                    run.eff.eta_det.value, run.eff.eta_det.error);
    });
    for (const auto& r : rows) csv += r;
    write_text(out_dir / "efficiency_curve.csv", csv);
  }

  // --- sensitive area ---------------------------------------------------------
  {
    const auto ion_map = scan::synth_map(s.scan_ion_model, s.scan_grid);
    const auto electron_map = scan::synth_map(s.scan_electron_model, s.scan_grid);
    scan::EfficiencyMap det_map = ion_map;
    for (std::size_t i = 0; i < det_map.eta.size(); ++i) {
      const double ei = ion_map.eta[i], ee = electron_map.eta[i];
      det_map.eta[i] = ee + ei - ei * ee;
    }
    det_map.u_acc = s.geometry.u_acc;
    det_map.gain_voltage = s.scan_gain_voltage;
    scan::save_map_csv(out_dir / "map_ion.csv", ion_map);
    scan::save_map_csv(out_dir / "map_electron.csv", electron_map);
    scan::save_map_csv(out_dir / "map_det.csv", det_map);
    const auto dia = scan::sensitive_diameter_detail(det_map, s.scan_threshold);
    met["scan.sensitive_diameter_mm"] = phys::m_to_mm(dia.containment);
    met["scan.equivalent_area_diameter_mm"] = phys::m_to_mm(dia.equivalent_area);

    auto dump_scan = [&](const scan::EfficiencyMap& map, const char* name) {
      std::string csv = "x_mm,eta,sigma\n";
      for (const auto& p : scan::line_scan(map, scan::Axis::x, s.scan_line_offset))
        csv += fmt("%.9g,%.9g,%.9g\n", phys::m_to_mm(p.position), p.eta, p.sigma);
      write_text(out_dir / name, csv);
    };
    dump_scan(ion_map, "line_scan_ion.csv");
    dump_scan(electron_map, "line_scan_electron.csv");
    dump_scan(det_map, "line_scan_det.csv");
  }

  // --- claims ---------------------------------------------------------------
  rep.all_pass = true;
  if (!s.claims_file.empty()) {
    for (const auto& claim : load_claims(s.claims_file)) {
      ClaimRecord rec;
      rec.claim = claim;
      const auto it = met.find(claim.metric);
      if (it == met.end() || !std::isfinite(it->second)) {
        rec.pass = false;
        rec.note = "metric not computed";
      } else {
        rec.computed = it->second;
        rec.pass = std::abs(rec.computed - claim.expected) <= claim.tolerance;
      }
      rep.all_pass = rep.all_pass && rec.pass;
      rep.claims.push_back(std::move(rec));
    }
  }

  write_text(out_dir / "report.json", rep.to_json());
  return rep;
}

std::string ReproductionReport::to_json() const {
  nlohmann::json doc;
  doc["all_pass"] = all_pass;
  doc["metrics"] = metrics;
  nlohmann::json claim_list = nlohmann::json::array();
  for (const auto& rec : claims) {
    nlohmann::json c;
    c["id"] = rec.claim.id;
    c["description"] = rec.claim.description;
    c["metric"] = rec.claim.metric;
    c["provenance"] = rec.claim.provenance;
    c["expected"] = rec.claim.expected;
    c["tolerance"] = rec.claim.tolerance;
    c["computed"] = rec.computed;
    c["pass"] = rec.pass;
    if (!rec.note.empty()) c["note"] = rec.note;
    claim_list.push_back(std::move(c));
  }
  doc["claims"] = claim_list;
  doc["scenario"] = scenario_echo;
  return doc.dump(2) + "\n";
}

}  // namespace ionsim::report
