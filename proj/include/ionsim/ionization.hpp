#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ionsim/errors.hpp"

namespace ionsim::ion {

// Lifetime of the intermediate excited level. The rate model is not valid
// for pulses shorter than this.
inline constexpr double kIntermediateLifetime = 26.2e-9;  // s

// Rates generating the characteristic ionization time:
// tau = 1 / (rho_ee * sigma * flux).
struct GeneratingRates {
  double rho_ee = 0.5;  // steady-state excited population
  double sigma = 0.0;   // ionization cross section [m^2]
  double flux = 0.0;    // ionizing photon flux [m^-2 s^-1]
};

struct IonizationModel {
  double p_inf = 1.0;  // saturation ionization probability
  double tau = 0.0;    // 1/e ionization time [s]
  std::optional<GeneratingRates> rates;

  IonizationModel(double p_inf, double tau);
  IonizationModel(double p_inf, double tau, const GeneratingRates& rates);

  // Builds the model with tau derived from the generating rates.
  static IonizationModel from_rates(double p_inf, const GeneratingRates& rates);
};

// p_inf * (1 - exp(-t_p / tau)). t_p must be >= 0.
double ionization_probability(const IonizationModel& model, double t_p);

// Working point 6*tau of the detection sequence. [s]
double ionization_time(const IonizationModel& model);

enum class PreparedState { F1, F2 };

struct DataPoint {
  double t_p = 0.0;      // pulse length [s]
  std::uint64_t trials = 0;
  std::uint64_t ionized = 0;
};

struct IonizationDataset {
  std::vector<DataPoint> points;  // nondecreasing in t_p
  PreparedState prepared_state = PreparedState::F2;

  void validate() const;
};

struct FidelityInputs {
  double p_ion_f2 = 0.0;
  double p_ion_f1 = 0.0;
};

// Average probability to identify the hyperfine state correctly:
// (p_ion_f2 + (1 - p_ion_f1)) / 2.
double readout_fidelity(const FidelityInputs& inputs);

struct FitOptions {
  bool weighted = false;       // inverse binomial-variance weights
  bool joint_p_inf = false;    // fit (tau, p_inf) jointly instead of tau alone
  bool validity_guard = true;  // refuse points below kIntermediateLifetime
  int max_iterations = 200;
};

struct TauFit {
  double tau = 0.0;        // [s]
  double std_error = 0.0;  // [s], from local curvature of the loss
  double p_inf = 0.0;      // input value, or joint estimate
  double rss = 0.0;
  int iterations = 0;
  std::size_t points_used = 0;
};

// Least-squares fit of tau with p_inf held fixed, restricted to points with
// t_p <= t_p_max. Needs >= 3 such points.
TauFit fit_tau(const IonizationDataset& data, double p_inf, double t_p_max,
               const FitOptions& options = {});

struct PInfEstimate {
  double value = 0.0;
  double std_error = 0.0;  // binomial
  std::uint64_t trials = 0;
  std::size_t points_used = 0;
};

// Trials-weighted mean of the observed probabilities over points with
// t_p > t_p_min.
PInfEstimate estimate_p_inf(const IonizationDataset& data, double t_p_min);

// Synthetic datasets. Noiseless rounds p*trials to the nearest count; the
// sampled variants draw binomial counts.
IonizationDataset make_noiseless_dataset(const IonizationModel& model,
                                         const std::vector<double>& t_grid,
                                         std::uint64_t trials);
IonizationDataset sample_dataset(const IonizationModel& model,
                                 const std::vector<double>& t_grid,
                                 std::uint64_t trials, std::uint64_t seed);
IonizationDataset sample_flat_dataset(double p, const std::vector<double>& t_grid,
                                      std::uint64_t trials, std::uint64_t seed,
                                      PreparedState state);

// CSV I/O, columns: t_p_ns, trials, ionized, state. One dataset per state
// present in the file, F2 first.
std::vector<IonizationDataset> load_datasets_csv(const std::filesystem::path& path);
void save_datasets_csv(const std::filesystem::path& path,
                       const std::vector<IonizationDataset>& datasets);

}  // namespace ionsim::ion
