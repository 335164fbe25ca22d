#include "ionsim/tof.hpp"

#include <cmath>
#include <string>

namespace ionsim::tof {

void DetectorGeometry::validate() const {
  if (!(gap > 0.0)) throw ValidationError("DetectorGeometry: gap must be > 0");
  if (!(ionization_z > 0.0 && ionization_z < gap))
    throw ValidationError("DetectorGeometry: ionization position must lie inside the gap");
  if (!(u_acc > 0.0)) throw ValidationError("DetectorGeometry: u_acc must be > 0");
  if (!(ion_cem.length >= 0.0 && electron_cem.length >= 0.0))
    throw ValidationError("DetectorGeometry: CEM segment lengths must be >= 0");
  if (!(transit_time >= 0.0))
    throw ValidationError("DetectorGeometry: transit time must be >= 0");
}

Fragment Fragment::rb87_ion() { return {phys::kRb87IonMass, phys::kElementaryCharge, 0.0}; }

Fragment Fragment::electron() { return {phys::kElectronMass, -phys::kElementaryCharge, 0.0}; }

void Fragment::validate() const {
  if (!(mass > 0.0)) throw ValidationError("Fragment: mass must be > 0");
  if (charge == 0.0) throw ValidationError("Fragment: charge must be nonzero");
  if (!(start_kinetic_energy >= 0.0))
    throw ValidationError("Fragment: start kinetic energy must be >= 0");
}

double segment_time(double length, double v0, double accel) {
  if (!(length > 0.0)) return 0.0;
  if (!(v0 >= 0.0)) throw ValidationError("segment_time: v0 must be >= 0");
  const double disc = v0 * v0 + 2.0 * accel * length;
  if (disc < 0.0)
    throw ReflectedParticleError("segment_time: turning point inside segment");
  if (v0 == 0.0 && accel <= 0.0)
    throw ReflectedParticleError("segment_time: particle at rest with no forward field");
  // 2s/(v0 + sqrt(v0^2 + 2as)) equals the smallest positive root for every
  // traversable case, including a = 0.
  return 2.0 * length / (v0 + std::sqrt(disc));
}

namespace {

struct Side {
  double gap_distance;  // m
  const CemSegment* cem;
};

Side side_for(const DetectorGeometry& geom, const Fragment& frag) {
  // ionization_z is measured from the electron-CEM entrance: the electron
  // traverses ionization_z, the ion the remainder.
  if (frag.charge > 0.0) return {geom.gap - geom.ionization_z, &geom.ion_cem};
  return {geom.ionization_z, &geom.electron_cem};
}

}  // namespace

FlightTime flight_time(const DetectorGeometry& geom, const Fragment& frag) {
  geom.validate();
  frag.validate();
  const Side side = side_for(geom, frag);
  const double q = std::abs(frag.charge);
  const double field = geom.u_acc / geom.gap;  // V/m
  const double accel = q * field / frag.mass;  // toward the detector

  FlightTime ft;
  const double v0 = std::sqrt(2.0 * frag.start_kinetic_energy / frag.mass);
  ft.gap = segment_time(side.gap_distance, v0, accel);
  ft.entrance_kinetic_energy =
      frag.start_kinetic_energy + q * field * side.gap_distance;

  if (side.cem->length > 0.0) {
    const double v1 = std::sqrt(2.0 * ft.entrance_kinetic_energy / frag.mass);
    const double cem_accel =
        -q * side.cem->potential_drop / (side.cem->length * frag.mass);
    ft.in_cem = segment_time(side.cem->length, v1, cem_accel);
  }
  return ft;
}

double tof_difference(const DetectorGeometry& geom, const Fragment& ion,
                      const Fragment& electron) {
  if (!(ion.charge > 0.0) || !(electron.charge < 0.0))
    throw ValidationError("tof_difference: expected a positive and a negative fragment");
  return flight_time(geom, ion).total() - flight_time(geom, electron).total();
}

double detection_time(const DetectorGeometry& geom, const Fragment& ion,
                      const Fragment& electron) {
  return tof_difference(geom, ion, electron) + flight_time(geom, electron).total() +
         geom.transit_time;
}

std::vector<DtPoint> dt_curve(DetectorGeometry geom, const Fragment& ion,
                              const Fragment& electron,
                              const std::vector<double>& voltages) {
  std::vector<DtPoint> out;
  out.reserve(voltages.size());
  for (double u : voltages) {
    if (!(u > 0.0)) throw ValidationError("dt_curve: voltages must be > 0");
    geom.u_acc = u;
    DtPoint p;
    p.u_acc = u;
    p.t_ion = flight_time(geom, ion).total();
    p.t_electron = flight_time(geom, electron).total();
    p.dt = p.t_ion - p.t_electron;
    p.t_det = p.dt + p.t_electron + geom.transit_time;
    p.model_valid = u >= kModelValidityMinVoltage;
    out.push_back(p);
  }
  return out;
}

namespace {

// Monotone root find for f(x) = 0 on [lo, hi]; f must change sign.
template <typename F>
double bisect(F&& f, double lo, double hi, const char* what) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0)
    throw ValidationError(std::string("calibrate_cem: no bracket for ") + what);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if (flo * fm < 0.0) {
      hi = mid;
      fhi = fm;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

DetectorGeometry calibrate_cem(DetectorGeometry geom, double u_cal, double dt_anchor,
                               double t_e_anchor) {
  geom.u_acc = u_cal;
  geom.validate();
  if (!(dt_anchor > 0.0 && t_e_anchor > 0.0))
    throw ValidationError("calibrate_cem: anchors must be > 0");

  const Fragment ion = Fragment::rb87_ion();
  const Fragment electron = Fragment::electron();

  // The achievable in-CEM time is bounded by 2 L / v_entry (drop just short
  // of the entrance energy); bracket each drop accordingly.
  auto solve_side = [&](CemSegment& seg, const Fragment& frag, double t_target,
                        const char* what) {
    if (!(seg.length > 0.0))
      throw ValidationError("calibrate_cem: CEM segment length must be > 0");
    const double e_in = flight_time(geom, frag).entrance_kinetic_energy;
    const double u_max = e_in / std::abs(frag.charge);
    auto total_time = [&](double drop) {
      seg.potential_drop = drop;
      return flight_time(geom, frag).total() - t_target;
    };
    const double drop = bisect(total_time, -50.0 * u_max, u_max * (1.0 - 1e-12), what);
    seg.potential_drop = drop;
  };

  solve_side(geom.electron_cem, electron, t_e_anchor, "electron CEM drop");
  solve_side(geom.ion_cem, ion, dt_anchor + t_e_anchor, "ion CEM drop");
  return geom;
}

}  // namespace ionsim::tof
