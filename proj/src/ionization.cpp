#include "ionsim/ionization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "ionsim/physcore.hpp"

namespace ionsim::ion {

namespace {

void validate_model(double p_inf, double tau) {
  if (!(p_inf >= 0.0 && p_inf <= 1.0))
    throw ValidationError("IonizationModel: p_inf must be in [0, 1]");
  if (!(tau > 0.0)) throw ValidationError("IonizationModel: tau must be > 0");
}

void validate_rates(const GeneratingRates& r, double tau) {
  const double product = tau * r.rho_ee * r.sigma * r.flux;
  if (std::abs(product - 1.0) >= 1e-9)
    throw ValidationError("IonizationModel: tau inconsistent with generating rates");
}

double model_p(double p_inf, double tau, double t) {
  return p_inf * (1.0 - std::exp(-t / tau));
}

}  // namespace

IonizationModel::IonizationModel(double p_inf_, double tau_) : p_inf(p_inf_), tau(tau_) {
  validate_model(p_inf, tau);
}

IonizationModel::IonizationModel(double p_inf_, double tau_, const GeneratingRates& rates_)
    : p_inf(p_inf_), tau(tau_), rates(rates_) {
  validate_model(p_inf, tau);
  validate_rates(rates_, tau);
}

IonizationModel IonizationModel::from_rates(double p_inf, const GeneratingRates& rates) {
  const double denom = rates.rho_ee * rates.sigma * rates.flux;
  if (!(denom > 0.0))
    throw ValidationError("IonizationModel: generating rates must be positive");
  return IonizationModel(p_inf, 1.0 / denom, rates);
}

double ionization_probability(const IonizationModel& model, double t_p) {
  if (!(t_p >= 0.0)) throw ValidationError("ionization_probability: t_p must be >= 0");
  return model_p(model.p_inf, model.tau, t_p);
}

double ionization_time(const IonizationModel& model) { return 6.0 * model.tau; }

void IonizationDataset::validate() const {
  double prev = -1.0;
  for (const auto& p : points) {
    if (!(p.t_p >= 0.0)) throw ValidationError("IonizationDataset: t_p must be >= 0");
    if (p.ionized > p.trials)
      throw ValidationError("IonizationDataset: ionized exceeds trials");
    if (p.trials == 0) throw ValidationError("IonizationDataset: trials must be > 0");
    if (p.t_p < prev) throw ValidationError("IonizationDataset: points not sorted by t_p");
    prev = p.t_p;
  }
}

double readout_fidelity(const FidelityInputs& inputs) {
  if (!(inputs.p_ion_f2 >= 0.0 && inputs.p_ion_f2 <= 1.0))
    throw ValidationError("readout_fidelity: p_ion_f2 must be in [0, 1]");
  if (!(inputs.p_ion_f1 >= 0.0 && inputs.p_ion_f1 <= 1.0))
    throw ValidationError("readout_fidelity: p_ion_f1 must be in [0, 1]");
  return 0.5 * (inputs.p_ion_f2 + (1.0 - inputs.p_ion_f1));
}

TauFit fit_tau(const IonizationDataset& data, double p_inf, double t_p_max,
               const FitOptions& options) {
  data.validate();
  if (!(p_inf > 0.0 && p_inf <= 1.0))
    throw ValidationError("fit_tau: p_inf must be in (0, 1]");

  struct Obs {
    double t, p, w;
  };
  std::vector<Obs> obs;
  for (const auto& pt : data.points) {
    if (pt.t_p > t_p_max) continue;
    const double p = static_cast<double>(pt.ionized) / static_cast<double>(pt.trials);
    double w = 1.0;
    if (options.weighted) {
      const double n = static_cast<double>(pt.trials);
      const double var = std::max(p * (1.0 - p), 1.0 / n) / n;
      w = 1.0 / var;
    }
    obs.push_back({pt.t_p, p, w});
  }
  if (obs.size() < 3) throw ValidationError("fit_tau: need >= 3 points with t_p <= t_p_max");

  if (options.validity_guard) {
    for (const auto& o : obs)
      if (o.t < kIntermediateLifetime)
        throw ModelValidityError(
            "fit_tau: rate model not valid for pulses shorter than the intermediate-state "
            "lifetime (26.2 ns); exclude those points or disable the guard");
  }

  const auto [pmin, pmax] =
      std::minmax_element(obs.begin(), obs.end(), [](auto& a, auto& b) { return a.p < b.p; });
  if (pmin->p == pmax->p) throw FitError("fit_tau: degenerate data, all probabilities equal");

  const bool joint = options.joint_p_inf;

  // Closed-form start from the first point, clamped to a sane range.
  double tau;
  {
    const double p1 = std::min(obs.front().p, p_inf * (1.0 - 1e-12));
    tau = (p1 > 0.0) ? -obs.front().t / std::log1p(-p1 / p_inf) : t_p_max;
    tau = std::clamp(tau, 1e-9, t_p_max);
  }
  double pinf = p_inf;

  auto loss = [&](double tau_v, double pinf_v) {
    double s = 0.0;
    for (const auto& o : obs) {
      const double r = o.p - model_p(pinf_v, tau_v, o.t);
      s += o.w * r * r;
    }
    return s;
  };

  double rss = loss(tau, pinf);
  int iter = 0;
  bool converged = false;
  for (; iter < options.max_iterations; ++iter) {
    // Gauss-Newton step; g = d(model)/d(tau), h = d(model)/d(p_inf).
    double gg = 0.0, gr = 0.0, hh = 0.0, hr = 0.0, gh = 0.0;
    for (const auto& o : obs) {
      const double e = std::exp(-o.t / tau);
      const double g = -pinf * e * o.t / (tau * tau);
      const double h = 1.0 - e;
      const double r = o.p - model_p(pinf, tau, o.t);
      gg += o.w * g * g;
      gr += o.w * g * r;
      if (joint) {
        hh += o.w * h * h;
        hr += o.w * h * r;
        gh += o.w * g * h;
      }
    }
    double dtau, dpinf = 0.0;
    if (joint) {
      const double det = gg * hh - gh * gh;
      if (det <= 0.0) throw FitError("fit_tau: singular normal equations");
      dtau = (gr * hh - hr * gh) / det;
      dpinf = (hr * gg - gr * gh) / det;
    } else {
      if (gg <= 0.0) throw FitError("fit_tau: vanishing sensitivity to tau");
      dtau = gr / gg;
    }

    // Damping: halve the step until the loss decreases.
    double scale = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      const double tau_try = std::clamp(tau + scale * dtau, 1e-12, 1e3);
      const double pinf_try = joint ? std::clamp(pinf + scale * dpinf, 1e-12, 1.0) : pinf;
      const double rss_try = loss(tau_try, pinf_try);
      if (rss_try <= rss) {
        const double step = std::abs(tau_try - tau);
        tau = tau_try;
        pinf = pinf_try;
        const double drop = rss - rss_try;
        rss = rss_try;
        accepted = true;
        if (step <= 1e-12 * tau || drop <= 1e-30 + 1e-15 * rss) converged = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) {
      converged = true;  // no descent direction left at double precision
      break;
    }
    if (converged) break;
  }
  if (!converged) throw FitError("fit_tau: no convergence within iteration limit");

  // Standard error from the local quadratic of the loss at the minimum.
  double gg = 0.0, sw = 0.0;
  for (const auto& o : obs) {
    const double e = std::exp(-o.t / tau);
    const double g = -pinf * e * o.t / (tau * tau);
    gg += o.w * g * g;
    sw += o.w;
  }
  const auto n = static_cast<double>(obs.size());
  const double dof = n - (joint ? 2.0 : 1.0);
  double se = 0.0;
  if (gg > 0.0 && dof > 0.0) {
    // Unweighted: residual variance over curvature. Weighted: chi^2 convention.
    const double s2 = options.weighted ? std::max(1.0, rss / dof) : (rss / dof) * (n / sw);
    se = std::sqrt(s2 / gg);
  }

  TauFit out;
  out.tau = tau;
  out.std_error = se;
  out.p_inf = pinf;
  out.rss = rss;
  out.iterations = iter + 1;
  out.points_used = obs.size();
  return out;
}

PInfEstimate estimate_p_inf(const IonizationDataset& data, double t_p_min) {
  data.validate();
  std::uint64_t trials = 0, ionized = 0;
  std::size_t used = 0;
  for (const auto& pt : data.points) {
    if (pt.t_p <= t_p_min) continue;
    trials += pt.trials;
    ionized += pt.ionized;
    ++used;
  }
  if (used == 0) throw ValidationError("estimate_p_inf: no points with t_p > t_p_min");
  PInfEstimate est;
  est.value = static_cast<double>(ionized) / static_cast<double>(trials);
  est.std_error = std::sqrt(est.value * (1.0 - est.value) / static_cast<double>(trials));
  est.trials = trials;
  est.points_used = used;
  return est;
}

IonizationDataset make_noiseless_dataset(const IonizationModel& model,
                                         const std::vector<double>& t_grid,
                                         std::uint64_t trials) {
  IonizationDataset ds;
  for (double t : t_grid) {
    const double p = ionization_probability(model, t);
    ds.points.push_back({t, trials, static_cast<std::uint64_t>(std::llround(
                                        p * static_cast<double>(trials)))});
  }
  std::sort(ds.points.begin(), ds.points.end(),
            [](auto& a, auto& b) { return a.t_p < b.t_p; });
  ds.validate();
  return ds;
}

namespace {

IonizationDataset sample_points(const std::vector<double>& t_grid, std::uint64_t trials,
                                std::uint64_t seed, PreparedState state,
                                const std::function<double(double)>& prob) {
  std::mt19937_64 rng(seed);
  IonizationDataset ds;
  ds.prepared_state = state;
  std::vector<double> grid = t_grid;
  std::sort(grid.begin(), grid.end());
  for (double t : grid) {
    std::binomial_distribution<std::uint64_t> bin(trials, prob(t));
    ds.points.push_back({t, trials, bin(rng)});
  }
  ds.validate();
  return ds;
}

}  // namespace

IonizationDataset sample_dataset(const IonizationModel& model,
                                 const std::vector<double>& t_grid, std::uint64_t trials,
                                 std::uint64_t seed) {
  return sample_points(t_grid, trials, seed, PreparedState::F2,
                       [&](double t) { return ionization_probability(model, t); });
}

IonizationDataset sample_flat_dataset(double p, const std::vector<double>& t_grid,
                                      std::uint64_t trials, std::uint64_t seed,
                                      PreparedState state) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ValidationError("sample_flat_dataset: p must be in [0, 1]");
  return sample_points(t_grid, trials, seed, state, [&](double) { return p; });
}

namespace {

std::string state_name(PreparedState s) { return s == PreparedState::F1 ? "F1" : "F2"; }

PreparedState parse_state(const std::string& s) {
  if (s == "F1") return PreparedState::F1;
  if (s == "F2") return PreparedState::F2;
  throw ValidationError("ionization CSV: unknown state '" + s + "'");
}

}  // namespace

std::vector<IonizationDataset> load_datasets_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::map<PreparedState, IonizationDataset> by_state;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string f_t, f_trials, f_ion, f_state;
    std::getline(ss, f_t, ',');
    std::getline(ss, f_trials, ',');
    std::getline(ss, f_ion, ',');
    std::getline(ss, f_state, ',');
    if (f_t.find_first_of("0123456789") == std::string::npos) continue;  // header
    DataPoint pt;
    pt.t_p = phys::ns_to_s(std::stod(f_t));
    pt.trials = std::stoull(f_trials);
    pt.ionized = std::stoull(f_ion);
    // trim state
    const auto b = f_state.find_first_not_of(" \t\r");
    const auto e = f_state.find_last_not_of(" \t\r");
    const PreparedState st =
        (b == std::string::npos) ? PreparedState::F2 : parse_state(f_state.substr(b, e - b + 1));
    auto& ds = by_state[st];
    ds.prepared_state = st;
    ds.points.push_back(pt);
  }
  std::vector<IonizationDataset> out;
  for (auto st : {PreparedState::F2, PreparedState::F1}) {
    auto it = by_state.find(st);
    if (it == by_state.end()) continue;
    auto& ds = it->second;
    std::stable_sort(ds.points.begin(), ds.points.end(),
                     [](auto& a, auto& b) { return a.t_p < b.t_p; });
    ds.validate();
    out.push_back(std::move(ds));
  }
  return out;
}

void save_datasets_csv(const std::filesystem::path& path,
                       const std::vector<IonizationDataset>& datasets) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "t_p_ns,trials,ionized,state\n";
  char buf[128];
  for (const auto& ds : datasets) {
    for (const auto& pt : ds.points) {
      std::snprintf(buf, sizeof buf, "%.9g,%llu,%llu,%s\n", pt.t_p * 1e9,
                    static_cast<unsigned long long>(pt.trials),
                    static_cast<unsigned long long>(pt.ionized),
                    state_name(ds.prepared_state).c_str());
      out << buf;
    }
  }
}

}  // namespace ionsim::ion
