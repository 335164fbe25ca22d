#include <doctest.h>

#include <cmath>
#include <random>

#include "ionsim/physcore.hpp"

using namespace ionsim;
using namespace ionsim::phys;

TEST_SUITE("physcore") {

TEST_CASE("peak intensity") {
  CHECK(peak_intensity({473e-9, 1e-6, 0.0}) == 0.0);
  // P = pi/2 W over a 1 m waist normalizes to 1 W/m^2.
  CHECK(peak_intensity({473e-9, 1.0, std::acos(-1.0) / 2.0}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // Hand arithmetic: 2*0.0328 / (pi * (1.13e-6)^2) = 1.6352987e10.
  CHECK(peak_intensity({473e-9, 1.13e-6, 32.8e-3}) ==
        doctest::Approx(1.6352987e10).epsilon(1e-6));
}

TEST_CASE("photon flux") {
  CHECK(photon_flux({473e-9, 1e-6, 0.0}) == 0.0);
  // A beam whose peak intensity equals one photon energy per m^2 s.
  {
    const double lambda = 500e-9;
    const double power = photon_energy(lambda) * std::acos(-1.0) / 2.0;
    CHECK(photon_flux({lambda, 1.0, power}) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Hand arithmetic: 1.6352987e10 / (hc/473 nm) = 3.8939e28.
  CHECK(photon_flux({473e-9, 1.13e-6, 32.8e-3}) ==
        doctest::Approx(3.8939e28).epsilon(1e-4));
}

TEST_CASE("beam validation") {
  CHECK_THROWS_AS(GaussianBeam(473e-9, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(GaussianBeam(0.0, 1e-6, 1.0), ValidationError);
  CHECK_THROWS_AS(GaussianBeam(473e-9, 1e-6, -1.0), ValidationError);
}

TEST_CASE("unit round trips hold to 1e-12") {
  std::mt19937 rng(271);
  std::uniform_real_distribution<double> mag(-12.0, 12.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::pow(10.0, mag(rng));
    CHECK(s_to_ns(ns_to_s(v)) == doctest::Approx(v).epsilon(1e-12));
    CHECK(ns_to_s(s_to_ns(v)) == doctest::Approx(v).epsilon(1e-12));
    CHECK(m_to_mm(mm_to_m(v)) == doctest::Approx(v).epsilon(1e-12));
    CHECK(m_to_um(um_to_m(v)) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("flux scales linearly in power and as waist^-2") {
  std::mt19937 rng(272);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int i = 0; i < 200; ++i) {
    const double lambda = 400e-9 * u(rng);
    const double w = 1e-6 * u(rng);
    const double p = 1e-3 * u(rng);
    const double k = u(rng);
    const double base = photon_flux({lambda, w, p});
    CHECK(photon_flux({lambda, w, k * p}) == doctest::Approx(k * base).epsilon(1e-12));
    CHECK(photon_flux({lambda, k * w, p}) ==
          doctest::Approx(base / (k * k)).epsilon(1e-12));
  }
}

TEST_CASE("rb87 ion mass is the atom minus one electron") {
  CHECK(kRb87IonMass < kRb87AtomicMass);
  CHECK(kRb87AtomicMass - kRb87IonMass == doctest::Approx(kElectronMass).epsilon(1e-12));
}

}  // TEST_SUITE
