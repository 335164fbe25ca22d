#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ionsim/errors.hpp"

namespace ionsim::mc {

enum class Channel : std::uint8_t { ion, electron };
enum class Truth : std::uint8_t { pair, background, dark };
enum class RunKind : std::uint8_t { signal, background };

struct Hit {
  double t = 0.0;  // s
  Channel channel = Channel::ion;
  Truth truth = Truth::background;
  std::uint64_t pair_id = 0;  // meaningful only for Truth::pair
};

// Second-experiment scenario: photoion-electron pairs from the vapor plus
// independent background and dark processes on both channels.
struct ScenarioConfig {
  double duration = 60.0;          // s
  double rate_pair = 0.0;          // 1/s
  double eta_ion = 1.0;            // true ion detection efficiency
  double eta_electron = 1.0;       // true electron detection efficiency
  double rate_bg_ion = 0.0;        // 1/s, ionization-laser-only events
  double rate_bg_electron = 0.0;   // 1/s
  double rate_dark_ion = 0.0;      // 1/s
  double rate_dark_electron = 0.0; // 1/s
  double dt_mean = 388.81e-9;      // s, ion-electron flight-time difference
  double t_electron = 0.95e-9;     // s, electron flight time
  double peak_fwhm = 8.5e-9;       // s, correlation-peak width
  double jitter_electron_share = 0.0;  // variance fraction on the electron channel
  double tail_fraction = 0.02;     // late-ion tail probability
  double tail_tau = 20e-9;         // s, late-ion tail time constant
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const;
};

struct EventStream {
  std::vector<Hit> hits;  // sorted by time
  double window_begin = 0.0;  // s
  double window_end = 0.0;    // s, exclusive
  double live_time = 0.0;     // s, summed over merged windows
  RunKind kind = RunKind::signal;
  bool has_truth = false;
  std::uint64_t pairs_generated = 0;  // simulation metadata

  std::uint64_t count(Channel c) const;
  std::uint64_t count(Channel c, Truth t) const;
};

// Deterministic for a given (config, seed) independent of the worker count:
// the run is cut into fixed one-second slices, each with its own RNG stream.
EventStream generate(const ScenarioConfig& config);

// Same processes with the excitation laser off: no pairs, backgrounds and
// dark counts only.
EventStream generate_background(const ScenarioConfig& config, double duration,
                                std::uint64_t seed);

// Stable merge by timestamp. Run windows must be pairwise disjoint.
EventStream merge_and_sort(const std::vector<EventStream>& streams);

// CSV, columns: timestamp_ns, channel, truth. The truth column is omitted
// for real-data mode. Run metadata goes into `# key: value` comment lines.
void save_stream_csv(const std::filesystem::path& path, const EventStream& stream,
                     bool include_truth = true);
EventStream load_stream_csv(const std::filesystem::path& path);

}  // namespace ionsim::mc
