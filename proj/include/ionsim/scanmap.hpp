#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "ionsim/errors.hpp"

namespace ionsim::scan {

// Super-Gaussian plateau, eta(r) = eta_max * exp(-(2r/diameter_1e)^order).
struct PlateauModel {
  double eta_max = 1.0;
  double diameter_1e = 1e-3;  // m, where eta falls to eta_max/e
  double order = 8.0;         // >= 2, steepness of the edge
  double center_x = 0.0;      // m
  double center_y = 0.0;      // m

  void validate() const;
  double eta_at(double x, double y) const;
  // Diameter of the analytic eta = threshold contour.
  double contour_diameter(double threshold) const;
  // Radial distance between the 90% and 10% levels of eta_max.
  double edge_width() const;
};

struct GridSpec {
  double x0 = 0.0;  // m, first column center
  double y0 = 0.0;  // m, first row center
  double step = 0.0;
  std::size_t nx = 0;
  std::size_t ny = 0;

  void validate() const;
  double x_at(std::size_t i) const { return x0 + static_cast<double>(i) * step; }
  double y_at(std::size_t j) const { return y0 + static_cast<double>(j) * step; }
};

struct EfficiencyMap {
  GridSpec grid;
  std::vector<double> eta;    // row-major, index j*nx + i
  std::vector<double> sigma;  // per-point uncertainty, may be zero
  double u_acc = 0.0;         // V, metadata
  double gain_voltage = 0.0;  // V, metadata

  double at(std::size_t i, std::size_t j) const { return eta[j * grid.nx + i]; }
};

EfficiencyMap synth_map(const PlateauModel& model, const GridSpec& grid);

enum class Axis { x, y };

struct ScanPoint {
  double position = 0.0;  // m along the scan axis
  double eta = 0.0;
  double sigma = 0.0;
};

// Nearest-row (or column) extraction with no interpolation.
std::vector<ScanPoint> line_scan(const EfficiencyMap& map, Axis axis, double offset);

struct DiameterResult {
  double containment = 0.0;      // m, largest centered disk fully above threshold
  double equivalent_area = 0.0;  // m, disk with the area of the super-threshold set
  double center_x = 0.0;
  double center_y = 0.0;
  std::size_t points_above = 0;
};

// Containment rule: disk centered on the centroid of the super-threshold
// points, radius limited by the nearest failing point or the grid boundary.
double sensitive_diameter(const EfficiencyMap& map, double threshold);
DiameterResult sensitive_diameter_detail(const EfficiencyMap& map, double threshold);

// CSV, columns: x_mm, y_mm, eta, sigma.
void save_map_csv(const std::filesystem::path& path, const EfficiencyMap& map);
EfficiencyMap load_map_csv(const std::filesystem::path& path);

}  // namespace ionsim::scan
