#include "ionsim/scanmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace ionsim::scan {

void PlateauModel::validate() const {
  if (!(eta_max >= 0.0 && eta_max <= 1.0))
    throw ValidationError("PlateauModel: eta_max must be in [0, 1]");
  if (!(diameter_1e > 0.0)) throw ValidationError("PlateauModel: diameter must be > 0");
  if (!(order >= 2.0)) throw ValidationError("PlateauModel: order must be >= 2");
}

double PlateauModel::eta_at(double x, double y) const {
  const double r = std::hypot(x - center_x, y - center_y);
  return eta_max * std::exp(-std::pow(2.0 * r / diameter_1e, order));
}

double PlateauModel::contour_diameter(double threshold) const {
  if (!(threshold > 0.0 && threshold < eta_max)) return 0.0;
  return diameter_1e * std::pow(std::log(eta_max / threshold), 1.0 / order);
}

double PlateauModel::edge_width() const {
  const double r90 = 0.5 * diameter_1e * std::pow(std::log(1.0 / 0.9), 1.0 / order);
  const double r10 = 0.5 * diameter_1e * std::pow(std::log(1.0 / 0.1), 1.0 / order);
  return r10 - r90;
}

void GridSpec::validate() const {
  if (!(step > 0.0)) throw ValidationError("GridSpec: step must be > 0");
  if (nx < 2 || ny < 2) throw ValidationError("GridSpec: need at least a 2x2 grid");
}

EfficiencyMap synth_map(const PlateauModel& model, const GridSpec& grid) {
  model.validate();
  grid.validate();
  EfficiencyMap map;
  map.grid = grid;
  map.eta.resize(grid.nx * grid.ny);
  map.sigma.assign(grid.nx * grid.ny, 0.0);
  for (std::size_t j = 0; j < grid.ny; ++j)
    for (std::size_t i = 0; i < grid.nx; ++i)
      map.eta[j * grid.nx + i] = model.eta_at(grid.x_at(i), grid.y_at(j));
  return map;
}

std::vector<ScanPoint> line_scan(const EfficiencyMap& map, Axis axis, double offset) {
  const auto& g = map.grid;
  g.validate();
  const double lo = (axis == Axis::x) ? g.y0 : g.x0;
  const double hi = (axis == Axis::x) ? g.y_at(g.ny - 1) : g.x_at(g.nx - 1);
  if (offset < lo - 0.5 * g.step || offset > hi + 0.5 * g.step)
    throw ValidationError("line_scan: offset outside the grid");
  std::vector<ScanPoint> out;
  if (axis == Axis::x) {
    const auto j = static_cast<std::size_t>(std::clamp(
        std::llround((offset - g.y0) / g.step), 0LL, static_cast<long long>(g.ny - 1)));
    out.reserve(g.nx);
    for (std::size_t i = 0; i < g.nx; ++i)
      out.push_back({g.x_at(i), map.eta[j * g.nx + i], map.sigma[j * g.nx + i]});
  } else {
    const auto i = static_cast<std::size_t>(std::clamp(
        std::llround((offset - g.x0) / g.step), 0LL, static_cast<long long>(g.nx - 1)));
    out.reserve(g.ny);
    for (std::size_t j = 0; j < g.ny; ++j)
      out.push_back({g.y_at(j), map.eta[j * g.nx + i], map.sigma[j * g.nx + i]});
  }
  return out;
}

DiameterResult sensitive_diameter_detail(const EfficiencyMap& map, double threshold) {
  const auto& g = map.grid;
  g.validate();
  DiameterResult res;
  double sum_x = 0.0, sum_y = 0.0;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i)
      if (map.eta[j * g.nx + i] > threshold) {
        sum_x += g.x_at(i);
        sum_y += g.y_at(j);
        ++res.points_above;
      }
  if (res.points_above == 0)
    throw ValidationError("sensitive_diameter: no point exceeds the threshold");
  const auto n = static_cast<double>(res.points_above);
  res.center_x = sum_x / n;
  res.center_y = sum_y / n;

  double nearest_fail = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i)
      if (!(map.eta[j * g.nx + i] > threshold))
        nearest_fail = std::min(
            nearest_fail, std::hypot(g.x_at(i) - res.center_x, g.y_at(j) - res.center_y));

  const double bound_x = std::min(res.center_x - g.x0, g.x_at(g.nx - 1) - res.center_x);
  const double bound_y = std::min(res.center_y - g.y0, g.y_at(g.ny - 1) - res.center_y);
  const double radius = std::min(nearest_fail, std::min(bound_x, bound_y));
  res.containment = 2.0 * radius;
  res.equivalent_area = 2.0 * std::sqrt(n * g.step * g.step / std::numbers::pi);
  return res;
}

double sensitive_diameter(const EfficiencyMap& map, double threshold) {
  return sensitive_diameter_detail(map, threshold).containment;
}

void save_map_csv(const std::filesystem::path& path, const EfficiencyMap& map) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "x_mm,y_mm,eta,sigma\n";
  char buf[128];
  const auto& g = map.grid;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g\n", g.x_at(i) * 1e3,
                    g.y_at(j) * 1e3, map.eta[j * g.nx + i], map.sigma[j * g.nx + i]);
      out << buf;
    }
}

EfficiencyMap load_map_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  struct Row {
    double x, y, eta, sigma;
  };
  std::vector<Row> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.find_first_of("0123456789") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string f;
    Row r{};
    std::getline(ss, f, ',');
    r.x = std::stod(f) * 1e-3;
    std::getline(ss, f, ',');
    r.y = std::stod(f) * 1e-3;
    std::getline(ss, f, ',');
    r.eta = std::stod(f);
    if (std::getline(ss, f, ',')) r.sigma = std::stod(f);
    rows.push_back(r);
  }
  if (rows.empty()) throw ValidationError("map CSV: no data rows in " + path.string());

  std::vector<double> xs, ys;
  for (const auto& r : rows) xs.push_back(r.x), ys.push_back(r.y);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end(),
                       [](double a, double b) { return std::abs(a - b) < 1e-12; }),
           xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end(),
                       [](double a, double b) { return std::abs(a - b) < 1e-12; }),
           ys.end());
  if (xs.size() < 2 || ys.size() < 2 || xs.size() * ys.size() != rows.size())
    throw ValidationError("map CSV: grid is not rectangular");

  EfficiencyMap map;
  map.grid.x0 = xs.front();
  map.grid.y0 = ys.front();
  map.grid.step = xs[1] - xs[0];
  map.grid.nx = xs.size();
  map.grid.ny = ys.size();
  map.grid.validate();
  map.eta.assign(rows.size(), 0.0);
  map.sigma.assign(rows.size(), 0.0);
  for (const auto& r : rows) {
    const auto i = static_cast<std::size_t>(std::llround((r.x - map.grid.x0) / map.grid.step));
    const auto j = static_cast<std::size_t>(std::llround((r.y - map.grid.y0) / map.grid.step));
    map.eta[j * map.grid.nx + i] = r.eta;
    map.sigma[j * map.grid.nx + i] = r.sigma;
  }
  return map;
}

}  // namespace ionsim::scan
