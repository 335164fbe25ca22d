#include "ionsim/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "ionsim/parallel.hpp"
#include "ionsim/physcore.hpp"

namespace ionsim::mc {

namespace {

constexpr double kSliceLength = 1.0;  // s
constexpr double kFwhmToSigma = 2.354820045030949;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t slice_seed(std::uint64_t seed, std::uint64_t stream,
                                std::uint64_t slice) {
  return splitmix64(splitmix64(seed ^ (0xA0761D64ULL + stream)) ^ slice);
}

bool hit_order(const Hit& a, const Hit& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.channel != b.channel) return a.channel < b.channel;
  if (a.truth != b.truth) return a.truth < b.truth;
  return a.pair_id < b.pair_id;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!(duration > 0.0)) throw ValidationError("ScenarioConfig: duration must be > 0");
  for (double r : {rate_pair, rate_bg_ion, rate_bg_electron, rate_dark_ion,
                   rate_dark_electron})
    if (!(r >= 0.0)) throw ValidationError("ScenarioConfig: rates must be >= 0");
  for (double p : {eta_ion, eta_electron, tail_fraction, jitter_electron_share})
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("ScenarioConfig: probabilities must be in [0, 1]");
  if (!(peak_fwhm >= 0.0)) throw ValidationError("ScenarioConfig: FWHM must be >= 0");
  if (tail_fraction > 0.0 && !(tail_tau > 0.0))
    throw ValidationError("ScenarioConfig: tail time constant must be > 0");
  if (!(dt_mean >= 0.0) || !(t_electron >= 0.0))
    throw ValidationError("ScenarioConfig: flight times must be >= 0");
  if (workers < 1) throw ValidationError("ScenarioConfig: workers must be >= 1");
}

std::uint64_t EventStream::count(Channel c) const {
  std::uint64_t n = 0;
  for (const auto& h : hits) n += h.channel == c;
  return n;
}

std::uint64_t EventStream::count(Channel c, Truth t) const {
  std::uint64_t n = 0;
  for (const auto& h : hits) n += (h.channel == c && h.truth == t);
  return n;
}

namespace {

struct SliceResult {
  std::vector<Hit> hits;
  std::uint64_t pairs = 0;
};

// Draw order is fixed per slice: pairs, then background ion/electron, then
// dark ion/electron.
SliceResult generate_slice(const ScenarioConfig& cfg, bool with_pairs, double t0,
                           double t1, double run_end, std::uint64_t slice,
                           std::uint64_t seed) {
  SliceResult out;
  std::mt19937_64 rng(slice_seed(seed, 0, slice));
  const double len = t1 - t0;
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  auto emit = [&](double t, Channel c, Truth tr, std::uint64_t id) {
    if (t >= 0.0 && t <= run_end) out.hits.push_back({t, c, tr, id});
  };

  if (with_pairs && cfg.rate_pair > 0.0) {
    const double sigma = cfg.peak_fwhm / kFwhmToSigma;
    const double sigma_e = sigma * std::sqrt(cfg.jitter_electron_share);
    const double sigma_i = sigma * std::sqrt(1.0 - cfg.jitter_electron_share);
    std::poisson_distribution<std::uint64_t> n_pairs(cfg.rate_pair * len);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::uint64_t n = n_pairs(rng);
    out.pairs = n;
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint64_t id = (slice << 32) | (i + 1);
      const double t_pair = t0 + uni(rng) * len;
      if (uni(rng) < cfg.eta_electron) {
        double t = t_pair + cfg.t_electron;
        if (sigma_e > 0.0) t += sigma_e * gauss(rng);
        emit(t, Channel::electron, Truth::pair, id);
      }
      if (uni(rng) < cfg.eta_ion) {
        double t = t_pair + cfg.t_electron + cfg.dt_mean;
        if (sigma_i > 0.0) t += sigma_i * gauss(rng);
        if (cfg.tail_fraction > 0.0 && uni(rng) < cfg.tail_fraction)
          t += -cfg.tail_tau * std::log1p(-uni(rng));
        emit(t, Channel::ion, Truth::pair, id);
      }
    }
  }

  auto poisson_events = [&](double rate, Channel c, Truth tr) {
    if (rate <= 0.0) return;
    std::poisson_distribution<std::uint64_t> count(rate * len);
    const std::uint64_t n = count(rng);
    for (std::uint64_t i = 0; i < n; ++i)
      emit(t0 + uni(rng) * len, c, tr, 0);
  };
  poisson_events(cfg.rate_bg_ion, Channel::ion, Truth::background);
  poisson_events(cfg.rate_bg_electron, Channel::electron, Truth::background);
  poisson_events(cfg.rate_dark_ion, Channel::ion, Truth::dark);
  poisson_events(cfg.rate_dark_electron, Channel::electron, Truth::dark);
  return out;
}

EventStream generate_impl(const ScenarioConfig& cfg, bool with_pairs, double duration,
                          std::uint64_t seed) {
  const auto n_slices = static_cast<std::size_t>(
      std::max(1.0, std::ceil(duration / kSliceLength - 1e-12)));
  std::vector<EventStream> slices(n_slices);
  parallel_for(n_slices, cfg.workers, [&](std::size_t k) {
    const double t0 = static_cast<double>(k) * kSliceLength;
    const double t1 = std::min(duration, t0 + kSliceLength);
    auto result = generate_slice(cfg, with_pairs, t0, t1, duration, k, seed);
    EventStream& s = slices[k];
    s.hits = std::move(result.hits);
    std::stable_sort(s.hits.begin(), s.hits.end(), hit_order);
    s.window_begin = t0;
    s.window_end = t1;
    s.live_time = t1 - t0;
    s.has_truth = true;
    s.pairs_generated = result.pairs;
  });

  EventStream stream = merge_and_sort(slices);
  stream.window_begin = 0.0;
  stream.window_end = duration;
  stream.live_time = duration;
  stream.kind = with_pairs ? RunKind::signal : RunKind::background;
  stream.has_truth = true;
  return stream;
}

}  // namespace

EventStream generate(const ScenarioConfig& config) {
  config.validate();
  return generate_impl(config, true, config.duration, config.seed);
}

EventStream generate_background(const ScenarioConfig& config, double duration,
                                std::uint64_t seed) {
  config.validate();
  if (!(duration > 0.0))
    throw ValidationError("generate_background: duration must be > 0");
  return generate_impl(config, false, duration, seed);
}

EventStream merge_and_sort(const std::vector<EventStream>& streams) {
  if (streams.empty()) return {};
  for (std::size_t a = 0; a < streams.size(); ++a)
    for (std::size_t b = a + 1; b < streams.size(); ++b) {
      const auto& x = streams[a];
      const auto& y = streams[b];
      if (x.window_begin < y.window_end && y.window_begin < x.window_end)
        throw ValidationError("merge_and_sort: overlapping run windows");
    }
  EventStream out;
  out.window_begin = streams.front().window_begin;
  out.window_end = streams.front().window_end;
  out.kind = streams.front().kind;
  out.has_truth = true;
  std::size_t total = 0;
  for (const auto& s : streams) total += s.hits.size();
  out.hits.reserve(total);
  for (const auto& s : streams) {
    out.window_begin = std::min(out.window_begin, s.window_begin);
    out.window_end = std::max(out.window_end, s.window_end);
    out.live_time += s.live_time;
    out.pairs_generated += s.pairs_generated;
    out.has_truth = out.has_truth && s.has_truth;
    out.hits.insert(out.hits.end(), s.hits.begin(), s.hits.end());
  }
  std::stable_sort(out.hits.begin(), out.hits.end(), hit_order);
  return out;
}

namespace {

const char* channel_name(Channel c) { return c == Channel::ion ? "ion" : "electron"; }

std::string truth_name(const Hit& h) {
  switch (h.truth) {
    case Truth::pair:
      return "pair:" + std::to_string(h.pair_id);
    case Truth::dark:
      return "dark";
    default:
      return "background";
  }
}

}  // namespace

void save_stream_csv(const std::filesystem::path& path, const EventStream& stream,
                     bool include_truth) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  char buf[160];
  std::snprintf(buf, sizeof buf, "# kind: %s\n",
                stream.kind == RunKind::background ? "background" : "signal");
  out << buf;
  std::snprintf(buf, sizeof buf, "# begin_ns: %.9f\n# end_ns: %.9f\n",
                stream.window_begin * 1e9, stream.window_end * 1e9);
  out << buf;
  include_truth = include_truth && stream.has_truth;
  out << (include_truth ? "timestamp_ns,channel,truth\n" : "timestamp_ns,channel\n");
  for (const auto& h : stream.hits) {
    std::snprintf(buf, sizeof buf, "%.6f,%s", h.t * 1e9, channel_name(h.channel));
    out << buf;
    if (include_truth) out << ',' << truth_name(h);
    out << '\n';
  }
}

EventStream load_stream_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  EventStream stream;
  stream.has_truth = false;
  bool saw_truth_column = false;
  bool have_window = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::stringstream ss(line.substr(1));
      std::string key, value;
      ss >> key >> value;
      if (key == "kind:")
        stream.kind = value == "background" ? RunKind::background : RunKind::signal;
      else if (key == "begin_ns:") {
        stream.window_begin = phys::ns_to_s(std::stod(value));
        have_window = true;
      } else if (key == "end_ns:") {
        stream.window_end = phys::ns_to_s(std::stod(value));
        have_window = true;
      }
      continue;
    }
    if (line.find_first_of("0123456789") == std::string::npos ||
        line.find("timestamp") != std::string::npos) {
      saw_truth_column = line.find("truth") != std::string::npos;
      continue;
    }
    std::stringstream ss(line);
    std::string f_t, f_ch, f_truth;
    std::getline(ss, f_t, ',');
    std::getline(ss, f_ch, ',');
    std::getline(ss, f_truth, ',');
    Hit h;
    h.t = phys::ns_to_s(std::stod(f_t));
    if (f_ch.find("ion") != std::string::npos && f_ch.find("electron") == std::string::npos)
      h.channel = Channel::ion;
    else if (f_ch.find("electron") != std::string::npos)
      h.channel = Channel::electron;
    else
      throw ValidationError("event CSV: unknown channel '" + f_ch + "'");
    if (!f_truth.empty()) {
      saw_truth_column = true;
      if (f_truth.rfind("pair", 0) == 0) {
        h.truth = Truth::pair;
        const auto colon = f_truth.find(':');
        if (colon != std::string::npos)
          h.pair_id = std::stoull(f_truth.substr(colon + 1));
      } else if (f_truth.rfind("dark", 0) == 0) {
        h.truth = Truth::dark;
      } else {
        h.truth = Truth::background;
      }
    }
    stream.hits.push_back(h);
  }
  stream.has_truth = saw_truth_column;
  std::stable_sort(stream.hits.begin(), stream.hits.end(), hit_order);
  if (!have_window && !stream.hits.empty()) {
    stream.window_begin = 0.0;
    stream.window_end = stream.hits.back().t;
  }
  stream.live_time = stream.window_end - stream.window_begin;
  return stream;
}

}  // namespace ionsim::mc
