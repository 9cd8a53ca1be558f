#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xbar/circuit/device.hpp"

namespace xbar::circuit {

/// Physical layout of one tile. Drivers sit on source-line column 0 and the
/// sinks on bit-line row rows-1. A resistance of +inf models an open terminal.
struct CrossbarGeometry {
  std::size_t rows = 64;
  std::size_t cols = 64;
  double r_source = 0.0;
  double r_sink = 0.0;
  double r_wire = 0.0;

  void validate() const;
  bool ideal() const { return r_source == 0.0 && r_sink == 0.0 && r_wire == 0.0; }
};

/// Row-major R x C conductances in siemens.
class ConductanceMatrix {
 public:
  ConductanceMatrix() = default;
  ConductanceMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  ConductanceMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  /// Programs level indices (row-major) onto the device level grid.
  static ConductanceMatrix from_levels(std::size_t rows, std::size_t cols,
                                       std::span<const int> levels, const DeviceModel& device);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return g_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return g_[i * cols_ + j]; }
  std::span<const double> values() const { return g_; }

  /// Level index of every entry; throws RangeError when an entry is off-grid
  /// (beyond 1e-12 relative) or outside [1/r_off, 1/r_on].
  std::vector<int> read_levels(const DeviceModel& device) const;
  bool on_grid(const DeviceModel& device) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> g_;
};

/// out[j] = sum_i v[i] * g(i, j)
std::vector<double> ideal_mvm(std::span<const double> v, const ConductanceMatrix& g);

}  // namespace xbar::circuit
