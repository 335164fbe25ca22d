#pragma once

#include <vector>

#include "ionsim/errors.hpp"
#include "ionsim/physcore.hpp"

namespace ionsim::tof {

// The homogeneous-gap model is quantitative only above this voltage; the
// actual field configuration matters below it.
inline constexpr double kModelValidityMinVoltage = 1600.0;  // V

// Uniform-field segment traversed inside a CEM before the primary particle
// hit. potential_drop > 0 decelerates the entering particle.
struct CemSegment {
  double potential_drop = 0.0;  // V
  double length = 0.0;          // m
};

struct DetectorGeometry {
  double gap = 15.7e-3;          // m, cone entrance to cone entrance
  double ionization_z = 7.85e-3; // m, measured from the electron-CEM entrance
  double u_acc = 3.8e3;          // V, total acceleration voltage across the gap
  CemSegment ion_cem{0.0, 9.5e-3};
  CemSegment electron_cem{0.0, 10.0e-3};
  double transit_time = 26e-9;   // s, avalanche transit inside the CEM channel

  void validate() const;
};

struct Fragment {
  double mass = 0.0;                  // kg
  double charge = 0.0;                // C, signed; sign routes to the detector
  double start_kinetic_energy = 0.0;  // J

  static Fragment rb87_ion();
  static Fragment electron();

  void validate() const;
};

// Smallest positive root of s = v0 t + a t^2 / 2, in a form stable for
// a -> 0. Throws ReflectedParticleError if the turning point lies inside
// the segment.
double segment_time(double length, double v0, double accel);

struct FlightTime {
  double gap = 0.0;     // s
  double in_cem = 0.0;  // s
  double entrance_kinetic_energy = 0.0;  // J, at the cone entrance
  double total() const { return gap + in_cem; }
};

// Gap acceleration at U_acc/gap over the fragment's side of the gap, then
// the in-CEM segment of its detector.
FlightTime flight_time(const DetectorGeometry& geom, const Fragment& frag);

// dt = t_i - t_e.
double tof_difference(const DetectorGeometry& geom, const Fragment& ion,
                      const Fragment& electron);

// dt + t_e + t_transit.
double detection_time(const DetectorGeometry& geom, const Fragment& ion,
                      const Fragment& electron);

struct DtPoint {
  double u_acc = 0.0;  // V
  double t_ion = 0.0;  // s
  double t_electron = 0.0;
  double dt = 0.0;
  double t_det = 0.0;
  bool model_valid = true;  // false below kModelValidityMinVoltage
};

std::vector<DtPoint> dt_curve(DetectorGeometry geom, const Fragment& ion,
                              const Fragment& electron,
                              const std::vector<double>& voltages);

// Solves the two in-CEM potential drops (segment lengths held fixed) so the
// model reproduces the measured (dt, t_e) pair at the calibration voltage.
DetectorGeometry calibrate_cem(DetectorGeometry geom, double u_cal, double dt_anchor,
                               double t_e_anchor);

}  // namespace ionsim::tof
