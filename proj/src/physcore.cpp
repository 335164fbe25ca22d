#include "ionsim/physcore.hpp"

#include <cmath>
#include <numbers>

namespace ionsim::phys {

GaussianBeam::GaussianBeam(double wavelength_m, double waist_m, double power_w)
    : wavelength(wavelength_m), waist(waist_m), power(power_w) {
  if (!(wavelength > 0.0)) throw ValidationError("GaussianBeam: wavelength must be > 0");
  if (!(waist > 0.0)) throw ValidationError("GaussianBeam: waist must be > 0");
  if (!(power >= 0.0)) throw ValidationError("GaussianBeam: power must be >= 0");
}

double peak_intensity(const GaussianBeam& beam) {
  return 2.0 * beam.power / (std::numbers::pi * beam.waist * beam.waist);
}

double photon_flux(const GaussianBeam& beam) {
  return peak_intensity(beam) / photon_energy(beam.wavelength);
}

}  // namespace ionsim::phys
