#pragma once

#include "ionsim/errors.hpp"

namespace ionsim::phys {

// CODATA 2018; h, c and e are exact in the 2019 SI.
inline constexpr double kElementaryCharge = 1.602176634e-19;   // C
inline constexpr double kElectronMass = 9.1093837015e-31;      // kg
inline constexpr double kPlanck = 6.62607015e-34;              // J s
inline constexpr double kSpeedOfLight = 299792458.0;           // m/s
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;   // kg
inline constexpr double kRb87AtomicMass = 86.909180531 * kAtomicMassUnit;  // kg

// Singly charged ion: atomic mass minus one electron mass.
inline constexpr double kRb87IonMass = kRb87AtomicMass - kElectronMass;  // kg

// Unit helpers for the I/O boundary. All internal arithmetic is SI base units.
constexpr double ns_to_s(double t_ns) { return t_ns * 1e-9; }
constexpr double s_to_ns(double t_s) { return t_s * 1e9; }
constexpr double mm_to_m(double x_mm) { return x_mm * 1e-3; }
constexpr double m_to_mm(double x_m) { return x_m * 1e3; }
constexpr double um_to_m(double x_um) { return x_um * 1e-6; }
constexpr double m_to_um(double x_m) { return x_m * 1e6; }

// Energy of one photon at the given vacuum wavelength. [J]
constexpr double photon_energy(double wavelength_m) {
  return kPlanck * kSpeedOfLight / wavelength_m;
}

struct GaussianBeam {
  double wavelength;  // m
  double waist;       // m, 1/e^2 intensity radius
  double power;       // W

  GaussianBeam(double wavelength_m, double waist_m, double power_w);
};

// On-axis intensity 2P/(pi w^2). [W/m^2]
double peak_intensity(const GaussianBeam& beam);

// On-axis photon flux, peak intensity divided by the photon energy.
// [photons m^-2 s^-1]
double photon_flux(const GaussianBeam& beam);

}  // namespace ionsim::phys
