#include "ionsim/coincidence.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

namespace ionsim::coinc {

namespace {

// Greedy forward matcher. Electrons ascend, so the earliest unused ion not
// before t_e + lo is the nearest subsequent one; the scan pointer never
// rewinds and each ion is consumed at most once.
std::vector<double> matched_diffs(const mc::EventStream& stream, double lo, double hi) {
  std::vector<double> ions, electrons;
  for (const auto& h : stream.hits)
    (h.channel == mc::Channel::ion ? ions : electrons).push_back(h.t);
  if (ions.empty() || electrons.empty())
    throw ValidationError("pairing: both channels must be nonempty");
  std::vector<double> diffs;
  std::size_t j = 0;
  for (const double te : electrons) {
    while (j < ions.size() && ions[j] < te + lo) ++j;
    if (j == ions.size()) break;
    const double d = ions[j] - te;
    if (d <= hi) {
      diffs.push_back(d);
      ++j;
    }
  }
  return diffs;
}

}  // namespace

TimeDiffHistogram histogram(const mc::EventStream& stream, const HistogramOptions& opt) {
  if (!(opt.bin_width > 0.0)) throw ValidationError("histogram: bin width must be > 0");
  if (!(opt.span_max > opt.span_min))
    throw ValidationError("histogram: span must be nonempty");
  TimeDiffHistogram h;
  h.bin_width = opt.bin_width;
  h.origin = opt.span_min;
  const auto nbins = static_cast<std::size_t>(
      std::ceil((opt.span_max - opt.span_min) / opt.bin_width - 1e-9));
  h.counts.assign(nbins, 0.0);
  for (const double d : matched_diffs(stream, opt.span_min, opt.span_max)) {
    auto idx = static_cast<std::size_t>((d - h.origin) / h.bin_width);
    if (idx >= nbins) idx = nbins - 1;
    h.counts[idx] += 1.0;
    ++h.total_pairs;
  }
  return h;
}

namespace {

double gauss_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752); }

double gauss_pdf(double z) { return 0.39894228040143268 * std::exp(-0.5 * z * z); }

// 4x4 linear solve, partial pivoting.
bool solve4(std::array<std::array<double, 4>, 4> a, std::array<double, 4>& b) {
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (int col = 3; col >= 0; --col) {
    for (int r = 0; r < col; ++r) {
      b[r] -= a[r][col] / a[col][col] * b[col];
      a[r][col] = 0.0;
    }
    b[col] /= a[col][col];
  }
  return true;
}

}  // namespace

PeakFit fit_peak(const TimeDiffHistogram& h) {
  const std::size_t n = h.bins();
  if (n < 8) throw FitError("fit_peak: too few bins");

  // Work in bin units; the parameter scales stay comparable.
  std::vector<double> c(h.counts);
  std::vector<double> sorted(c);
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double floor0 = sorted[n / 2];
  std::size_t peak_bin = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (c[i] > c[peak_bin]) peak_bin = i;
  if (c[peak_bin] < floor0 + 10.0)
    throw FitError("fit_peak: no significant peak above the background floor");

  // Half-maximum width for the sigma start value.
  const double half = floor0 + 0.5 * (c[peak_bin] - floor0);
  std::size_t left = peak_bin, right = peak_bin;
  while (left > 0 && c[left - 1] >= half) --left;
  while (right + 1 < n && c[right + 1] >= half) ++right;
  double sigma = std::max(0.5, static_cast<double>(right - left + 1) / 2.354820045);
  double mu = static_cast<double>(peak_bin) + 0.5;
  double floor_c = floor0;
  double area = 0.0;
  {
    const auto lo = static_cast<std::size_t>(
        std::max(0.0, mu - 5.0 * sigma));
    const auto hi = static_cast<std::size_t>(
        std::min(static_cast<double>(n - 1), mu + 5.0 * sigma));
    for (std::size_t i = lo; i <= hi; ++i) area += std::max(0.0, c[i] - floor0);
    area = std::max(area, 1.0);
  }

  // Restrict the fit to the neighbourhood of the peak so the empty far span
  // does not dominate the floor.
  const double fit_halfspan = std::max(25.0, 10.0 * 2.354820045 * sigma);
  const auto fit_lo = static_cast<std::size_t>(std::max(0.0, mu - fit_halfspan));
  const auto fit_hi =
      static_cast<std::size_t>(std::min(static_cast<double>(n - 1), mu + fit_halfspan));
  const std::size_t m = fit_hi - fit_lo + 1;
  if (m < 8) throw FitError("fit_peak: fit span too small");

  auto model = [&](std::size_t i, double s_area, double s_mu, double s_sigma,
                   double s_floor) {
    const double zlo = (static_cast<double>(i) - s_mu) / s_sigma;
    const double zhi = (static_cast<double>(i) + 1.0 - s_mu) / s_sigma;
    return s_area * (gauss_cdf(zhi) - gauss_cdf(zlo)) + s_floor;
  };
  auto chi2 = [&](double s_area, double s_mu, double s_sigma, double s_floor) {
    double s = 0.0;
    for (std::size_t i = fit_lo; i <= fit_hi; ++i) {
      const double r = c[i] - model(i, s_area, s_mu, s_sigma, s_floor);
      s += r * r / std::max(c[i], 1.0);
    }
    return s;
  };

  double cur = chi2(area, mu, sigma, floor_c);
  double lambda = 1e-3;
  int iter = 0;
  bool converged = false;
  std::array<std::array<double, 4>, 4> jtj{};
  for (; iter < 500 && !converged; ++iter) {
    jtj = {};
    std::array<double, 4> jtr{};
    for (std::size_t i = fit_lo; i <= fit_hi; ++i) {
      const double w = 1.0 / std::max(c[i], 1.0);
      const double zlo = (static_cast<double>(i) - mu) / sigma;
      const double zhi = (static_cast<double>(i) + 1.0 - mu) / sigma;
      const double plo = gauss_pdf(zlo), phi = gauss_pdf(zhi);
      const std::array<double, 4> j = {
          gauss_cdf(zhi) - gauss_cdf(zlo),            // d/d area
          area * (plo - phi) / sigma,                 // d/d mu
          area * (plo * zlo - phi * zhi) / sigma,     // d/d sigma
          1.0,                                        // d/d floor
      };
      const double r = c[i] - model(i, area, mu, sigma, floor_c);
      for (int a = 0; a < 4; ++a) {
        jtr[a] += w * j[a] * r;
        for (int b = 0; b < 4; ++b) jtj[a][b] += w * j[a] * j[b];
      }
    }
    bool improved = false;
    for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
      auto a = jtj;
      for (int d = 0; d < 4; ++d) a[d][d] *= 1.0 + lambda;
      auto step = jtr;
      if (solve4(a, step)) {
        const double area_t = area + step[0];
        const double mu_t = mu + step[1];
        const double sigma_t = sigma + step[2];
        const double floor_t = floor_c + step[3];
        if (area_t > 0.0 && sigma_t > 0.05) {
          const double next = chi2(area_t, mu_t, sigma_t, floor_t);
          if (next <= cur) {
            const double drop = cur - next;
            area = area_t;
            mu = mu_t;
            sigma = sigma_t;
            floor_c = floor_t;
            cur = next;
            improved = true;
            lambda = std::max(lambda * 0.3, 1e-12);
            if (drop <= 1e-12 * (cur + 1e-12)) converged = true;
            break;
          }
        }
      }
      lambda *= 10.0;
    }
    if (!improved) break;  // no acceptable step left at double precision
  }
  if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma))
    throw FitError("fit_peak: fit did not converge");

  // Covariance from the unscaled normal matrix (counting-statistics weights).
  double center_err = 0.0, sigma_err = 0.0;
  {
    auto a = jtj;
    std::array<std::array<double, 4>, 4> inv{};
    bool ok = true;
    for (int col = 0; col < 4 && ok; ++col) {
      std::array<double, 4> e{};
      e[col] = 1.0;
      auto tmp = a;
      ok = solve4(tmp, e);
      for (int r = 0; r < 4; ++r) inv[r][col] = e[r];
    }
    if (ok) {
      center_err = std::sqrt(std::max(0.0, inv[1][1]));
      sigma_err = std::sqrt(std::max(0.0, inv[2][2]));
    }
  }

  PeakFit out;
  out.center = h.origin + mu * h.bin_width;
  out.sigma = sigma * h.bin_width;
  out.area = area;
  out.floor = floor_c;
  out.amplitude = area * (gauss_cdf(0.5 / sigma) - gauss_cdf(-0.5 / sigma));
  out.center_err = center_err * h.bin_width;
  out.sigma_err = sigma_err * h.bin_width;
  out.chi2_reduced = cur / static_cast<double>(m > 4 ? m - 4 : 1);
  out.iterations = iter;
  out.span_lo = h.origin;
  out.span_hi = h.origin + static_cast<double>(n) * h.bin_width;
  if (out.center - 10.0 * out.fwhm() < out.span_lo ||
      out.center + 10.0 * out.fwhm() > out.span_hi)
    throw FitError("fit_peak: histogram span does not cover the peak +- 10 FWHM");
  return out;
}

CountSummary count_window(const mc::EventStream& signal, const mc::EventStream& background,
                          const PeakFit& peak, const WindowRule& rule) {
  if (background.kind != mc::RunKind::background)
    throw ValidationError("count_window: background stream lacks the laser-off flag");
  if (!(peak.sigma > 0.0)) throw ValidationError("count_window: peak not fitted");
  if (!(rule.before >= 0.0 && rule.after >= 0.0))
    throw ValidationError("count_window: window offsets must be >= 0");
  if (!(signal.live_time > 0.0 && background.live_time > 0.0))
    throw ValidationError("count_window: run live times must be > 0");

  CountSummary s;
  s.window_lo = peak.center - rule.before;
  s.window_hi = peak.center + rule.after;
  if (peak.span_hi > peak.span_lo &&
      (s.window_lo < peak.span_lo || s.window_hi > peak.span_hi))
    throw ValidationError("count_window: window exceeds the histogram span");
  s.n_ion = signal.count(mc::Channel::ion);
  s.n_electron = signal.count(mc::Channel::electron);
  s.n_bg_ion_raw = background.count(mc::Channel::ion);
  s.n_bg_electron_raw = background.count(mc::Channel::electron);
  s.bg_scale = signal.live_time / background.live_time;
  s.n_bg_ion = s.bg_scale * static_cast<double>(s.n_bg_ion_raw);
  s.n_bg_electron = s.bg_scale * static_cast<double>(s.n_bg_electron_raw);
  s.n_coinc = matched_diffs(signal, s.window_lo, s.window_hi).size();
  return s;
}

CountSummary make_summary(std::uint64_t n_ion, std::uint64_t n_bg_ion,
                          std::uint64_t n_electron, std::uint64_t n_bg_electron,
                          std::uint64_t n_coinc, double window_lo, double window_hi) {
  CountSummary s;
  s.n_ion = n_ion;
  s.n_electron = n_electron;
  s.n_bg_ion_raw = n_bg_ion;
  s.n_bg_electron_raw = n_bg_electron;
  s.n_bg_ion = static_cast<double>(n_bg_ion);
  s.n_bg_electron = static_cast<double>(n_bg_electron);
  s.n_coinc = n_coinc;
  s.window_lo = window_lo;
  s.window_hi = window_hi;
  return s;
}

EfficiencyResult efficiencies(const CountSummary& c) {
  const double ni = c.corrected_ion();
  const double ne = c.corrected_electron();
  const auto nc = static_cast<double>(c.n_coinc);
  if (!(ni > 0.0) || !(ne > 0.0))
    throw CalibrationError(
        "efficiencies: corrected singles are not positive; background run does not "
        "match the signal run");
  if (nc > ni || nc > ne)
    throw CalibrationError("efficiencies: coincidences exceed corrected singles");

  EfficiencyResult r;
  r.eta_ion.value = nc / ne;
  r.eta_electron.value = nc / ni;
  const double ei = r.eta_ion.value, ee = r.eta_electron.value;
  r.eta_det.value = ee + ei - ei * ee;

  // Independent-Poisson propagation on (N_c, N, N_b).
  const double var_ni = static_cast<double>(c.n_ion) +
                        c.bg_scale * c.bg_scale * static_cast<double>(c.n_bg_ion_raw);
  const double var_ne =
      static_cast<double>(c.n_electron) +
      c.bg_scale * c.bg_scale * static_cast<double>(c.n_bg_electron_raw);
  if (nc > 0.0) {
    r.eta_ion.error = ei * std::sqrt(1.0 / nc + var_ne / (ne * ne));
    r.eta_electron.error = ee * std::sqrt(1.0 / nc + var_ni / (ni * ni));
  }
  r.eta_det.error = std::hypot((1.0 - ee) * r.eta_ion.error,
                               (1.0 - ei) * r.eta_electron.error);

  // Conditional flavor: N_c binomial given the corrected singles, plus the
  // background-subtraction fluctuation in both runs.
  const double bg_e = c.bg_scale * (1.0 + c.bg_scale) *
                      static_cast<double>(c.n_bg_electron_raw);
  const double bg_i =
      c.bg_scale * (1.0 + c.bg_scale) * static_cast<double>(c.n_bg_ion_raw);
  r.eta_ion_err_cond = std::sqrt(ei * (1.0 - ei) / ne + ei * ei * bg_e / (ne * ne));
  r.eta_electron_err_cond =
      std::sqrt(ee * (1.0 - ee) / ni + ee * ee * bg_i / (ni * ni));
  r.eta_det_err_cond = std::hypot((1.0 - ee) * r.eta_ion_err_cond,
                                  (1.0 - ei) * r.eta_electron_err_cond);
  return r;
}

AccidentalEstimate accidental_ratio(const CountSummary& c, double duration) {
  if (!(duration > 0.0)) throw ValidationError("accidental_ratio: duration must be > 0");
  const double w = c.window_hi - c.window_lo;
  if (!(w >= 0.0)) throw ValidationError("accidental_ratio: empty window");
  AccidentalEstimate a;
  a.n_expected = static_cast<double>(c.n_ion) * static_cast<double>(c.n_electron) * w /
                 duration;
  a.n_expected_bg = c.n_bg_ion * c.n_bg_electron * w / duration;
  const auto nc = static_cast<double>(c.n_coinc);
  auto ratio_of = [&](double n_acc) {
    if (n_acc == 0.0) return 0.0;
    if (nc <= n_acc)
      throw CalibrationError("accidental_ratio: no true coincidences above accidentals");
    return n_acc / (nc - n_acc);
  };
  a.ratio = ratio_of(a.n_expected);
  a.ratio_bg = ratio_of(a.n_expected_bg);
  return a;
}

OverallResult overall(const EfficiencyResult& eff, double p_ion_f2, double t_ion,
                      double t_det) {
  if (!(p_ion_f2 >= 0.0 && p_ion_f2 <= 1.0))
    throw ValidationError("overall: p_ion_f2 must be in [0, 1]");
  if (!(t_ion >= 0.0 && t_det >= 0.0))
    throw ValidationError("overall: times must be >= 0");
  OverallResult r;
  r.eta = p_ion_f2 * eff.eta_det.value;
  r.eta_err = p_ion_f2 * eff.eta_det.error;
  r.t_tot = t_ion + t_det;
  return r;
}

std::uint64_t truth_coincidences(const mc::EventStream& stream, double lo, double hi) {
  if (!stream.has_truth)
    throw ValidationError("truth_coincidences: stream carries no truth tags");
  std::unordered_map<std::uint64_t, double> electron_t;
  for (const auto& h : stream.hits)
    if (h.truth == mc::Truth::pair && h.channel == mc::Channel::electron)
      electron_t.emplace(h.pair_id, h.t);
  std::uint64_t n = 0;
  for (const auto& h : stream.hits) {
    if (h.truth != mc::Truth::pair || h.channel != mc::Channel::ion) continue;
    const auto it = electron_t.find(h.pair_id);
    if (it == electron_t.end()) continue;
    const double d = h.t - it->second;
    if (d >= lo && d <= hi) ++n;
  }
  return n;
}

}  // namespace ionsim::coinc
