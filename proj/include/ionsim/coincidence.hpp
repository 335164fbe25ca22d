#pragma once

#include <cstdint>
#include <vector>

#include "ionsim/errors.hpp"
#include "ionsim/montecarlo.hpp"

namespace ionsim::coinc {

struct HistogramOptions {
  double bin_width = 1e-9;  // s
  double span_min = 0.0;    // s, smallest time difference considered
  double span_max = 1000e-9;
};

struct TimeDiffHistogram {
  double bin_width = 0.0;
  double origin = 0.0;  // left edge of bin 0
  std::vector<double> counts;
  std::uint64_t total_pairs = 0;

  std::size_t bins() const { return counts.size(); }
  double bin_center(std::size_t i) const {
    return origin + (static_cast<double>(i) + 0.5) * bin_width;
  }
};

// Electron-ion time differences under the pairing rule: each electron is
// matched to the nearest subsequent unused ion within the span; every hit is
// used at most once.
TimeDiffHistogram histogram(const mc::EventStream& stream,
                            const HistogramOptions& options = {});

struct PeakFit {
  double center = 0.0;      // s
  double sigma = 0.0;       // s
  double amplitude = 0.0;   // counts in the peak bin above the floor
  double area = 0.0;        // total counts under the Gaussian
  double floor = 0.0;       // counts per bin
  double center_err = 0.0;  // s
  double sigma_err = 0.0;   // s
  double chi2_reduced = 0.0;
  int iterations = 0;
  double span_lo = 0.0;  // source histogram span
  double span_hi = 0.0;

  double fwhm() const { return 2.354820045030949 * sigma; }
};

// Gaussian plus flat floor, least squares with Poisson weights on the bin
// counts. Bin contents are modeled by the exact Gaussian bin integrals.
PeakFit fit_peak(const TimeDiffHistogram& h);

struct WindowRule {
  double before = 20e-9;  // s before the correlation peak
  double after = 80e-9;   // s after it
};

struct CountSummary {
  std::uint64_t n_ion = 0;       // raw singles over the signal run
  std::uint64_t n_electron = 0;
  double n_bg_ion = 0.0;         // background singles scaled to signal live time
  double n_bg_electron = 0.0;
  std::uint64_t n_bg_ion_raw = 0;
  std::uint64_t n_bg_electron_raw = 0;
  double bg_scale = 1.0;         // signal live time / background live time
  std::uint64_t n_coinc = 0;     // pairs with dt inside the window
  double window_lo = 0.0;        // s, closed interval
  double window_hi = 0.0;

  double corrected_ion() const { return static_cast<double>(n_ion) - n_bg_ion; }
  double corrected_electron() const {
    return static_cast<double>(n_electron) - n_bg_electron;
  }
};

// Windowed coincidences plus singles bookkeeping. The window is the closed
// interval [peak center - before, peak center + after]; background singles
// are scaled by the live-time ratio.
CountSummary count_window(const mc::EventStream& signal,
                          const mc::EventStream& background, const PeakFit& peak,
                          const WindowRule& rule = {});

// For exact-arithmetic evaluation from published counts (equal live times).
CountSummary make_summary(std::uint64_t n_ion, std::uint64_t n_bg_ion,
                          std::uint64_t n_electron, std::uint64_t n_bg_electron,
                          std::uint64_t n_coinc, double window_lo, double window_hi);

struct ValueWithError {
  double value = 0.0;
  double error = 0.0;
};

struct EfficiencyResult {
  ValueWithError eta_ion;       // N_c / N'_e
  ValueWithError eta_electron;  // N_c / N'_i
  ValueWithError eta_det;       // eta_e + eta_i - eta_i eta_e
  // Errors with the coincidence subset treated as binomial in the corrected
  // singles; the .error fields treat all raw counts as independent Poisson.
  double eta_ion_err_cond = 0.0;
  double eta_electron_err_cond = 0.0;
  double eta_det_err_cond = 0.0;
};

EfficiencyResult efficiencies(const CountSummary& counts);

struct AccidentalEstimate {
  double n_expected = 0.0;   // flat-rate estimate from total singles rates
  double ratio = 0.0;        // n_expected / (N_c - n_expected)
  double n_expected_bg = 0.0;  // from background singles rates only
  double ratio_bg = 0.0;
};

AccidentalEstimate accidental_ratio(const CountSummary& counts, double duration);

struct OverallResult {
  double eta = 0.0;
  double eta_err = 0.0;
  double t_tot = 0.0;  // s
};

// eta = p_ion_f2 * eta_det, t_tot = t_ion + t_det.
OverallResult overall(const EfficiencyResult& eff, double p_ion_f2, double t_ion,
                      double t_det);

// Simulation-mode cross-check: truth pairs with both fragments detected and
// time difference inside [lo, hi].
std::uint64_t truth_coincidences(const mc::EventStream& stream, double lo, double hi);

}  // namespace ionsim::coinc
