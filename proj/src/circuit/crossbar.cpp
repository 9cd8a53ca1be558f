#include "xbar/circuit/crossbar.hpp"

#include <cmath>
#include <string>

#include "xbar/common/error.hpp"

namespace xbar::circuit {

void CrossbarGeometry::validate() const {
  if (rows < 1 || cols < 1) throw RangeError("crossbar needs at least one row and one column");
  for (double r : {r_source, r_sink, r_wire})
    if (!(r >= 0.0)) throw RangeError("crossbar resistances must be >= 0");
}

ConductanceMatrix::ConductanceMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), g_(rows * cols, fill) {}

ConductanceMatrix::ConductanceMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), g_(std::move(values)) {
  if (g_.size() != rows * cols)
    throw ShapeError("conductance data has " + std::to_string(g_.size()) + " entries, expected " +
                     std::to_string(rows * cols));
}

ConductanceMatrix ConductanceMatrix::from_levels(std::size_t rows, std::size_t cols,
                                                 std::span<const int> levels,
                                                 const DeviceModel& device) {
  if (levels.size() != rows * cols) throw ShapeError("level matrix has the wrong size");
  ConductanceMatrix m(rows, cols);
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (levels[k] < 0 || levels[k] >= device.levels)
      throw RangeError("level " + std::to_string(levels[k]) + " outside device range");
    m.g_[k] = device.level_conductance(levels[k]);
  }
  return m;
}

std::vector<int> ConductanceMatrix::read_levels(const DeviceModel& device) const {
  std::vector<int> out(g_.size());
  const double step = device.level_step();
  for (std::size_t k = 0; k < g_.size(); ++k) {
    const double x = (g_[k] - device.g_off()) / step;
    const long k_near = std::lround(x);
    if (k_near < 0 || k_near >= device.levels)
      throw RangeError("conductance outside [1/r_off, 1/r_on]");
    const double snapped = device.level_conductance(static_cast<int>(k_near));
    if (std::abs(g_[k] - snapped) > 1e-12 * snapped)
      throw RangeError("conductance is not on the device level grid");
    out[k] = static_cast<int>(k_near);
  }
  return out;
}

bool ConductanceMatrix::on_grid(const DeviceModel& device) const {
  try {
    (void)read_levels(device);
    return true;
  } catch (const RangeError&) {
    return false;
  }
}

std::vector<double> ideal_mvm(std::span<const double> v, const ConductanceMatrix& g) {
  if (v.size() != g.rows())
    throw ShapeError("ideal_mvm: voltage vector has " + std::to_string(v.size()) +
                     " entries, crossbar has " + std::to_string(g.rows()) + " rows");
  std::vector<double> out(g.cols(), 0.0);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    if (v[i] == 0.0) continue;
    for (std::size_t j = 0; j < g.cols(); ++j) out[j] += v[i] * g(i, j);
  }
  return out;
}

}  // namespace xbar::circuit
