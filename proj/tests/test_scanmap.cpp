#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ionsim/scanmap.hpp"

using namespace ionsim;
using namespace ionsim::scan;

namespace {

// Independent oracle: solve eta(r) = threshold for r by bisection on the
// radial profile, without the model's analytic inversion.
double bisect_contour_diameter(const PlateauModel& m, double threshold) {
  double lo = 0.0, hi = 10.0 * m.diameter_1e;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (m.eta_at(m.center_x + mid, m.center_y) > threshold)
      lo = mid;
    else
      hi = mid;
  }
  return lo + hi;  // 2 * radius
}

GridSpec centered_grid(double half_extent, double step) {
  GridSpec g;
  g.step = step;
  g.nx = static_cast<std::size_t>(std::floor(2.0 * half_extent / step)) + 1;
  g.ny = g.nx;
  g.x0 = -0.5 * static_cast<double>(g.nx - 1) * step;
  g.y0 = g.x0;
  return g;
}

}  // namespace

TEST_SUITE("scanmap") {

TEST_CASE("synthetic map basics") {
  const GridSpec grid = centered_grid(1.2e-3, 0.02e-3);
  PlateauModel zero{0.0, 1e-3, 8.0, 0.0, 0.0};
  const auto zmap = synth_map(zero, grid);
  for (double v : zmap.eta) CHECK(v == 0.0);

  PlateauModel m{0.991, 1.4e-3, 8.0, 0.0, 0.0};
  const auto map = synth_map(m, grid);
  // The grid has a point at the exact center; eta there is eta_max.
  const std::size_t ci = (grid.nx - 1) / 2, cj = (grid.ny - 1) / 2;
  CHECK(map.at(ci, cj) == doctest::Approx(0.991).epsilon(1e-12));
  for (double v : map.eta) CHECK(v <= 0.991);
}

TEST_CASE("analytic contour against the bisection oracle") {
  std::mt19937 rng(601);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    PlateauModel m{0.9 + 0.1 * u(rng), (0.8 + 1.2 * u(rng)) * 1e-3,
                   2.0 + 10.0 * u(rng), (u(rng) - 0.5) * 1e-4, (u(rng) - 0.5) * 1e-4};
    const double threshold = m.eta_max * (0.9 + 0.09 * u(rng));
    CHECK(m.contour_diameter(threshold) ==
          doctest::Approx(bisect_contour_diameter(m, threshold)).epsilon(1e-9));
  }
}

TEST_CASE("line scan extracts the nearest row") {
  const GridSpec grid = centered_grid(1.0e-3, 0.02e-3);
  PlateauModel m{0.99, 1.2e-3, 8.0, 0.1e-3, -0.4e-3};
  const auto map = synth_map(m, grid);

  const auto scan_row = line_scan(map, Axis::x, -0.4e-3);
  REQUIRE(scan_row.size() == grid.nx);
  // Row values equal the model evaluated on that row.
  for (std::size_t i = 0; i < scan_row.size(); ++i) {
    CHECK(scan_row[i].position == doctest::Approx(grid.x_at(i)).epsilon(1e-12));
    CHECK(scan_row[i].eta ==
          doctest::Approx(m.eta_at(grid.x_at(i), -0.4e-3)).epsilon(1e-9));
  }
  // The maximum sits at the model center.
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < scan_row.size(); ++i)
    if (scan_row[i].eta > scan_row[argmax].eta) argmax = i;
  CHECK(scan_row[argmax].position == doctest::Approx(0.1e-3).epsilon(1e-6));

  // Constant map scans constant.
  EfficiencyMap flat;
  flat.grid = grid;
  flat.eta.assign(grid.nx * grid.ny, 0.5);
  flat.sigma.assign(grid.nx * grid.ny, 0.0);
  for (const auto& p : line_scan(flat, Axis::y, 0.0)) CHECK(p.eta == 0.5);

  CHECK_THROWS_AS(line_scan(map, Axis::x, 5e-3), ValidationError);
}

TEST_CASE("sensitive diameter recovers the analytic contour") {
  // eta_max 0.991, order 8; diameter_1e chosen so the 0.988 contour sits at
  // 0.84 mm: d = 0.84 mm / (ln(0.991/0.988))^(1/8).
  const double d1e = 0.84e-3 / std::pow(std::log(0.991 / 0.988), 1.0 / 8.0);
  PlateauModel m{0.991, d1e, 8.0, 0.0, 0.0};
  const double oracle = bisect_contour_diameter(m, 0.988);
  CHECK(oracle == doctest::Approx(0.84e-3).epsilon(1e-9));

  const GridSpec grid = centered_grid(1.2e-3, 0.02e-3);
  const auto map = synth_map(m, grid);
  const double dia = sensitive_diameter(map, 0.988);
  CHECK(std::abs(dia - 0.84e-3) <= grid.step);

  const auto detail = sensitive_diameter_detail(map, 0.988);
  CHECK(std::abs(detail.equivalent_area - 0.84e-3) <= 2.0 * grid.step);
  CHECK(std::abs(detail.center_x) < grid.step);
  CHECK(std::abs(detail.center_y) < grid.step);
}

TEST_CASE("uniform maps: full extent above threshold, error below") {
  const GridSpec grid = centered_grid(1.0e-3, 0.05e-3);
  EfficiencyMap flat;
  flat.grid = grid;
  flat.eta.assign(grid.nx * grid.ny, 0.995);
  flat.sigma.assign(grid.nx * grid.ny, 0.0);
  // Everything passes: the disk is limited by the grid extent.
  CHECK(sensitive_diameter(flat, 0.988) ==
        doctest::Approx(2.0e-3).epsilon(0.06));
  for (auto& v : flat.eta) v = 0.9;
  CHECK_THROWS_AS(sensitive_diameter(flat, 0.988), ValidationError);
}

TEST_CASE("round trip over random plateau models") {
  std::mt19937 rng(602);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    const double step = 0.02e-3;
    PlateauModel m{0.95 + 0.05 * u(rng), (0.9 + 0.9 * u(rng)) * 1e-3,
                   4.0 + 8.0 * u(rng), (u(rng) - 0.5) * 0.2e-3,
                   (u(rng) - 0.5) * 0.2e-3};
    const double threshold = m.eta_max - (0.002 + 0.01 * u(rng));
    const double analytic = m.contour_diameter(threshold);
    if (analytic < 10.0 * step) continue;  // keep the disk well resolved
    const GridSpec grid = centered_grid(1.5e-3, step);
    const auto map = synth_map(m, grid);
    const double dia = sensitive_diameter(map, threshold);
    CHECK(std::abs(dia - analytic) <= step);
  }
}

TEST_CASE("raising the threshold never grows the diameter") {
  const GridSpec grid = centered_grid(1.2e-3, 0.02e-3);
  PlateauModel m{0.991, 1.4e-3, 8.0, 0.0, 0.0};
  const auto map = synth_map(m, grid);
  double prev = 1.0;  // larger than any grid diameter in meters
  for (double threshold : {0.90, 0.95, 0.97, 0.98, 0.985, 0.988, 0.990}) {
    const double dia = sensitive_diameter(map, threshold);
    CHECK(dia <= prev + 1e-12);
    prev = dia;
  }
}

TEST_CASE("edge width is positive and shrinks with order") {
  PlateauModel soft{0.99, 1.4e-3, 4.0, 0.0, 0.0};
  PlateauModel steep{0.99, 1.4e-3, 16.0, 0.0, 0.0};
  CHECK(soft.edge_width() > 0.0);
  CHECK(steep.edge_width() < soft.edge_width());
}

TEST_CASE("map csv round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "ionsim_scan_csv";
  std::filesystem::create_directories(dir);
  const auto path = dir / "map.csv";
  const GridSpec grid = centered_grid(0.5e-3, 0.05e-3);
  PlateauModel m{0.99, 1.0e-3, 8.0, 0.0, 0.0};
  const auto map = synth_map(m, grid);
  save_map_csv(path, map);
  const auto loaded = load_map_csv(path);
  CHECK(loaded.grid.nx == grid.nx);
  CHECK(loaded.grid.ny == grid.ny);
  CHECK(loaded.grid.step == doctest::Approx(grid.step).epsilon(1e-9));
  for (std::size_t i = 0; i < map.eta.size(); ++i)
    CHECK(loaded.eta[i] == doctest::Approx(map.eta[i]).epsilon(1e-6));
  std::filesystem::remove_all(dir);
}

TEST_CASE("model validation") {
  const PlateauModel bad_eta{1.2, 1e-3, 8.0, 0.0, 0.0};
  const PlateauModel bad_diameter{0.9, 0.0, 8.0, 0.0, 0.0};
  const PlateauModel bad_order{0.9, 1e-3, 1.0, 0.0, 0.0};
  CHECK_THROWS_AS(bad_eta.validate(), ValidationError);
  CHECK_THROWS_AS(bad_diameter.validate(), ValidationError);
  CHECK_THROWS_AS(bad_order.validate(), ValidationError);
  GridSpec g;
  CHECK_THROWS_AS(g.validate(), ValidationError);
}

}  // TEST_SUITE
