#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ionsim/coincidence.hpp"
#include "ionsim/montecarlo.hpp"

using namespace ionsim;
using namespace ionsim::coinc;

namespace {

mc::ScenarioConfig paper_shaped(std::uint64_t seed) {
  mc::ScenarioConfig cfg;
  cfg.duration = 60.0;
  cfg.rate_pair = 927.4;
  cfg.eta_ion = 0.926019;
  cfg.eta_electron = 0.875250;
  cfg.rate_bg_ion = 37.25;
  cfg.rate_bg_electron = 2464.0833;
  cfg.dt_mean = 388.81e-9;
  cfg.t_electron = 0.95e-9;
  cfg.peak_fwhm = 8.5e-9;
  cfg.tail_fraction = 0.005;
  cfg.tail_tau = 20e-9;
  cfg.seed = seed;
  cfg.workers = 2;
  return cfg;
}

mc::EventStream two_hit_stream(double t_electron, double diff) {
  mc::EventStream s;
  s.hits.push_back({t_electron, mc::Channel::electron, mc::Truth::pair, 1});
  s.hits.push_back({t_electron + diff, mc::Channel::ion, mc::Truth::pair, 1});
  s.window_begin = 0.0;
  s.window_end = 1.0;
  s.live_time = 1.0;
  s.has_truth = true;
  return s;
}

mc::EventStream empty_background(double live_time) {
  mc::EventStream s;
  s.window_begin = 0.0;
  s.window_end = live_time;
  s.live_time = live_time;
  s.kind = mc::RunKind::background;
  return s;
}

// Independent bin-integral oracle for the Gaussian fit self-consistency case.
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

const CountSummary kPaperCounts =
    make_summary(53762, 2235, 196547, 147845, 45099, 0.0, 100e-9);

}  // namespace

TEST_SUITE("coincidence") {

TEST_CASE("histogram of a single pair") {
  const auto s = two_hit_stream(100e-9, 388.81e-9);
  const auto h = histogram(s);
  CHECK(h.total_pairs == 1);
  // 1 ns bins from 0: the difference lands in bin 388 (388-389 ns).
  CHECK(h.counts[388] == 1.0);
  CHECK(h.bin_center(388) == doctest::Approx(388.5e-9));
  double sum = 0.0;
  for (double c : h.counts) sum += c;
  CHECK(sum == 1.0);
}

TEST_CASE("histogram of a noise-free stream is a delta") {
  mc::ScenarioConfig cfg;
  cfg.duration = 1.0;
  cfg.rate_pair = 500.0;
  cfg.peak_fwhm = 0.0;
  cfg.tail_fraction = 0.0;
  cfg.seed = 21;
  const auto stream = mc::generate(cfg);
  const auto h = histogram(stream);
  CHECK(h.total_pairs == stream.pairs_generated);
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < h.bins(); ++i)
    if (h.counts[i] > 0) {
      ++nonzero;
      CHECK(h.counts[i] == static_cast<double>(stream.pairs_generated));
      CHECK(std::abs(h.bin_center(i) - cfg.dt_mean) <= h.bin_width);
    }
  CHECK(nonzero == 1);
}

TEST_CASE("histogram requires both channels") {
  mc::EventStream s;
  s.hits.push_back({1e-6, mc::Channel::ion, mc::Truth::background, 0});
  s.live_time = 1.0;
  CHECK_THROWS_AS(histogram(s), ValidationError);
}

TEST_CASE("pairing uses each hit once, nearest subsequent ion") {
  mc::EventStream s;
  s.hits.push_back({0.0, mc::Channel::electron, mc::Truth::background, 0});
  s.hits.push_back({100e-9, mc::Channel::electron, mc::Truth::background, 0});
  s.hits.push_back({150.5e-9, mc::Channel::ion, mc::Truth::background, 0});
  s.hits.push_back({500.9e-9, mc::Channel::ion, mc::Truth::background, 0});
  s.live_time = 1.0;
  const auto h = histogram(s);
  // First electron takes the 150.5 ns ion, second gets the remaining one
  // at a 400.9 ns difference.
  CHECK(h.total_pairs == 2);
  CHECK(h.counts[150] == 1.0);
  CHECK(h.counts[400] == 1.0);
}

TEST_CASE("gaussian fit recovers an exact bin-integral histogram") {
  TimeDiffHistogram h;
  h.bin_width = 1e-9;
  h.origin = 0.0;
  const double mu = 388.81, sigma = 3.61, area = 50000.0;  // bin units
  h.counts.resize(1000);
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double z0 = (static_cast<double>(i) - mu) / sigma;
    const double z1 = (static_cast<double>(i) + 1.0 - mu) / sigma;
    h.counts[i] = area * (normal_cdf(z1) - normal_cdf(z0));
  }
  const auto fit = fit_peak(h);
  CHECK(fit.center == doctest::Approx(388.81e-9).epsilon(1e-9));
  CHECK(fit.sigma == doctest::Approx(3.61e-9).epsilon(1e-9));
  CHECK(fit.floor == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(fit.area == doctest::Approx(area).epsilon(1e-9));
}

TEST_CASE("fwhm from sigma") {
  PeakFit f;
  f.sigma = 3.609e-9;
  // 2 sqrt(2 ln 2) * 3.609 = 8.49855 by hand; rounds to 8.5.
  CHECK(f.fwhm() == doctest::Approx(8.49855e-9).epsilon(1e-5));
  CHECK(f.fwhm() == doctest::Approx(8.5e-9).epsilon(2e-4));
}

TEST_CASE("flat histogram has no significant peak") {
  TimeDiffHistogram h;
  h.bin_width = 1e-9;
  h.origin = 0.0;
  h.counts.assign(500, 5.0);
  CHECK_THROWS_AS(fit_peak(h), FitError);
}

TEST_CASE("window boundary semantics are closed") {
  PeakFit peak;
  peak.center = 388.81e-9;
  peak.sigma = 3.6e-9;
  const auto bg = empty_background(1.0);
  for (double offset_ns : {79.0, 80.0}) {
    const auto s = two_hit_stream(0.0, peak.center + offset_ns * 1e-9);
    const auto counts = count_window(s, bg, peak);
    CHECK(counts.n_coinc == 1);
  }
  const auto outside = two_hit_stream(0.0, peak.center + 81e-9);
  CHECK(count_window(outside, bg, peak).n_coinc == 0);
  const auto at_start = two_hit_stream(0.0, peak.center - 20e-9);
  CHECK(count_window(at_start, bg, peak).n_coinc == 1);
  const auto before = two_hit_stream(0.0, peak.center - 21e-9);
  CHECK(count_window(before, bg, peak).n_coinc == 0);
}

TEST_CASE("background singles scale with the live-time ratio") {
  auto cfg = paper_shaped(31);
  cfg.duration = 4.0;
  const auto signal = mc::generate(cfg);
  const auto bg = mc::generate_background(cfg, 8.0, 77);
  const auto h = histogram(signal);
  const auto peak = fit_peak(h);
  const auto counts = count_window(signal, bg, peak);
  CHECK(counts.bg_scale == doctest::Approx(0.5));
  CHECK(counts.n_bg_ion ==
        doctest::Approx(0.5 * static_cast<double>(counts.n_bg_ion_raw)));
  CHECK(counts.n_bg_electron ==
        doctest::Approx(0.5 * static_cast<double>(counts.n_bg_electron_raw)));
}

TEST_CASE("window exceeding the histogram span is rejected") {
  auto cfg = paper_shaped(41);
  cfg.duration = 4.0;
  const auto signal = mc::generate(cfg);
  HistogramOptions narrow;
  narrow.span_min = 340e-9;
  narrow.span_max = 440e-9;
  const auto peak = fit_peak(histogram(signal, narrow));
  const auto bg = empty_background(4.0);
  const WindowRule wide{60e-9, 80e-9};  // extends below the span start
  CHECK_THROWS_AS(count_window(signal, bg, peak, wide), ValidationError);
  CHECK_NOTHROW(count_window(signal, bg, peak, WindowRule{20e-9, 40e-9}));
}

TEST_CASE("fit refuses a peak hugging the span edge") {
  auto cfg = paper_shaped(43);
  cfg.duration = 4.0;
  const auto signal = mc::generate(cfg);
  HistogramOptions tight;
  tight.span_min = 380e-9;
  tight.span_max = 430e-9;  // peak center only ~9 ns from the left edge
  CHECK_THROWS_AS(fit_peak(histogram(signal, tight)), FitError);
}

TEST_CASE("count_window rejects a stream without the laser-off flag") {
  const auto s = two_hit_stream(0.0, 388.81e-9);
  PeakFit peak;
  peak.center = 388.81e-9;
  peak.sigma = 3.6e-9;
  CHECK_THROWS_AS(count_window(s, s, peak), ValidationError);
}

TEST_CASE("published counts give the published efficiencies exactly") {
  const auto eff = efficiencies(kPaperCounts);
  CHECK(eff.eta_ion.value == doctest::Approx(45099.0 / 48702.0).epsilon(1e-15));
  CHECK(eff.eta_electron.value == doctest::Approx(45099.0 / 51527.0).epsilon(1e-15));
  // 0.9260, 0.8752, 0.9908 at four decimals.
  CHECK(std::abs(eff.eta_ion.value - 0.9260) < 5e-4);
  CHECK(std::abs(eff.eta_electron.value - 0.8752) < 5e-4);
  CHECK(std::abs(eff.eta_det.value - 0.9908) < 5e-4);
  const double eta_det_expected =
      1.0 - (1.0 - 45099.0 / 48702.0) * (1.0 - 45099.0 / 51527.0);
  CHECK(eff.eta_det.value == doctest::Approx(eta_det_expected).epsilon(1e-15));

  // Independent-Poisson propagation, hand arithmetic.
  CHECK(eff.eta_ion.error == doctest::Approx(0.011980).epsilon(1e-3));
  CHECK(eff.eta_electron.error == doctest::Approx(0.0057570).epsilon(1e-3));
  CHECK(eff.eta_det.error == doctest::Approx(0.0015540).epsilon(1e-3));
  // Conditional-binomial flavor, hand arithmetic; at or below the published
  // two-digit uncertainties after rounding slack.
  CHECK(eff.eta_ion_err_cond == doctest::Approx(0.0104072).epsilon(1e-3));
  CHECK(eff.eta_electron_err_cond == doctest::Approx(0.0018463).epsilon(1e-3));
  CHECK(eff.eta_ion_err_cond <= 0.0105);
  CHECK(eff.eta_electron_err_cond <= 0.0025);
  CHECK(eff.eta_det_err_cond <= 0.0025);
}

TEST_CASE("lossless and symmetric efficiency cases") {
  const auto lossless = efficiencies(make_summary(1000, 0, 1000, 0, 1000, 0.0, 100e-9));
  CHECK(lossless.eta_ion.value == 1.0);
  CHECK(lossless.eta_electron.value == 1.0);
  CHECK(lossless.eta_det.value == 1.0);

  const auto half = efficiencies(make_summary(1000, 0, 1000, 0, 500, 0.0, 100e-9));
  CHECK(half.eta_det.value == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("efficiency bounds hold over random count sets") {
  std::mt19937 rng(501);
  std::uniform_int_distribution<std::uint64_t> singles(100, 100000);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const std::uint64_t ni = singles(rng), ne = singles(rng);
    const std::uint64_t bi = static_cast<std::uint64_t>(frac(rng) * 0.3 * ni);
    const std::uint64_t be = static_cast<std::uint64_t>(frac(rng) * 0.3 * ne);
    const auto max_c = std::min(ni - bi, ne - be);
    const std::uint64_t nc = 1 + static_cast<std::uint64_t>(frac(rng) * (max_c - 1));
    const auto eff = efficiencies(make_summary(ni, bi, ne, be, nc, 0.0, 100e-9));
    CHECK(eff.eta_det.value >=
          std::max(eff.eta_ion.value, eff.eta_electron.value) - 1e-12);
    CHECK(eff.eta_det.value <= eff.eta_ion.value + eff.eta_electron.value + 1e-12);
    CHECK(eff.eta_ion.value >= 0.0);
    CHECK(eff.eta_ion.value <= 1.0);
  }
}

TEST_CASE("efficiencies reject inconsistent runs") {
  CHECK_THROWS_AS(efficiencies(make_summary(100, 150, 1000, 10, 50, 0.0, 1e-7)),
                  CalibrationError);
  CHECK_THROWS_AS(efficiencies(make_summary(1000, 10, 1000, 10, 995, 0.0, 1e-7)),
                  CalibrationError);
}

TEST_CASE("accidental estimate on the published counts") {
  const auto acc = accidental_ratio(kPaperCounts, 60.0);
  // N_i N_e W / T = 53762 * 196547 * 100 ns / 60 s = 17.611 by hand.
  CHECK(acc.n_expected == doctest::Approx(17.6113).epsilon(1e-4));
  CHECK(acc.ratio == doctest::Approx(3.90655e-4).epsilon(1e-3));
  // Background-only rates: 2235 * 147845 * 100 ns / 60 s = 0.5507.
  CHECK(acc.n_expected_bg == doctest::Approx(0.550723).epsilon(1e-4));
  CHECK(acc.ratio_bg == doctest::Approx(1.22116e-5).epsilon(1e-3));
  CHECK(acc.ratio_bg < 1e-4);
}

TEST_CASE("accidental estimate trivia") {
  const auto zero = accidental_ratio(make_summary(0, 0, 1000, 0, 10, 0.0, 1e-7), 60.0);
  CHECK(zero.n_expected == 0.0);
  CHECK(zero.ratio == 0.0);

  const auto base = accidental_ratio(make_summary(1000, 0, 2000, 0, 900, 0.0, 1e-7), 60.0);
  const auto quad =
      accidental_ratio(make_summary(2000, 0, 4000, 0, 900, 0.0, 1e-7), 60.0);
  CHECK(quad.n_expected == doctest::Approx(4.0 * base.n_expected).epsilon(1e-12));

  CHECK_THROWS_AS(
      accidental_ratio(make_summary(100000000, 0, 100000000, 0, 3, 0.0, 1e-6), 1.0),
      CalibrationError);
}

TEST_CASE("overall efficiency and detection time") {
  const auto eff = efficiencies(kPaperCounts);
  const auto all = overall(eff, 0.9905386, 386.4e-9, 415.76e-9);
  // 0.9905386 * 0.9907709 = 0.9813969 by hand.
  CHECK(all.eta == doctest::Approx(0.9813969).epsilon(1e-5));
  CHECK(std::abs(all.eta - 0.982) <= 0.002);
  CHECK(all.t_tot == doctest::Approx(802.16e-9).epsilon(1e-9));
  CHECK(std::abs(all.t_tot - 802e-9) <= 17e-9);

  CHECK(overall(eff, 1.0, 0.0, 0.0).eta == doctest::Approx(eff.eta_det.value));
  CHECK(overall(eff, 0.0, 1e-9, 1e-9).eta == 0.0);
}

TEST_CASE("paper-shaped round trip: peak, window, efficiencies") {
  const auto cfg = paper_shaped(2025);
  const auto signal = mc::generate(cfg);
  const auto bg = mc::generate_background(cfg, 60.0, 4077);
  const auto h = histogram(signal);
  const auto peak = fit_peak(h);
  CHECK(std::abs(peak.center - cfg.dt_mean) <= 3.0 * peak.center_err);
  CHECK(peak.fwhm() == doctest::Approx(cfg.peak_fwhm).epsilon(0.10));

  const auto counts = count_window(signal, bg, peak);
  // Consistency with the published N_c at Poisson resolution.
  CHECK(std::abs(static_cast<double>(counts.n_coinc) - 45099.0) <
        4.5 * std::sqrt(45099.0));

  const auto eff = efficiencies(counts);
  CHECK(std::abs(eff.eta_ion.value - cfg.eta_ion) <= 4.0 * eff.eta_ion_err_cond);
  CHECK(std::abs(eff.eta_electron.value - cfg.eta_electron) <=
        4.0 * eff.eta_electron_err_cond);

  // Shifting the window by +-2 ns moves N_c by less than its Poisson error.
  const double sigma_nc = std::sqrt(static_cast<double>(counts.n_coinc));
  for (double shift_ns : {-2.0, 2.0}) {
    const WindowRule shifted{20e-9 - shift_ns * 1e-9, 80e-9 + shift_ns * 1e-9};
    const auto moved = count_window(signal, bg, peak, shifted);
    CHECK(std::abs(static_cast<double>(moved.n_coinc) -
                   static_cast<double>(counts.n_coinc)) < sigma_nc);
  }

  // Truth cross-check: windowed coincidences equal the truth-paired double
  // detections inside the window, up to the accidental estimate.
  const auto acc = accidental_ratio(counts, cfg.duration);
  const auto truth = truth_coincidences(signal, counts.window_lo, counts.window_hi);
  CHECK(std::abs(static_cast<double>(counts.n_coinc) - static_cast<double>(truth)) <=
        acc.n_expected);
}

TEST_CASE("estimator bias over seeded runs") {
  const int runs = 40;
  double sum_i = 0, sum_e = 0, sum2_i = 0, sum2_e = 0;
  const auto base = paper_shaped(0);
  for (int k = 0; k < runs; ++k) {
    auto cfg = paper_shaped(6000 + static_cast<std::uint64_t>(k));
    const auto signal = mc::generate(cfg);
    const auto bg = mc::generate_background(cfg, 60.0, 7000 + static_cast<std::uint64_t>(k));
    const auto peak = fit_peak(histogram(signal));
    const auto eff = efficiencies(count_window(signal, bg, peak));
    sum_i += eff.eta_ion.value;
    sum2_i += eff.eta_ion.value * eff.eta_ion.value;
    sum_e += eff.eta_electron.value;
    sum2_e += eff.eta_electron.value * eff.eta_electron.value;
  }
  const double n = runs;
  const double mean_i = sum_i / n, mean_e = sum_e / n;
  const double sem_i = std::sqrt((sum2_i / n - mean_i * mean_i) / (n - 1.0));
  const double sem_e = std::sqrt((sum2_e / n - mean_e * mean_e) / (n - 1.0));
  CHECK(std::abs(mean_i - base.eta_ion) <= 3.0 * sem_i);
  CHECK(std::abs(mean_e - base.eta_electron) <= 3.0 * sem_e);
}

}  // TEST_SUITE
