#pragma once

#include <cstddef>
#include <vector>

#include "xbar/circuit/crossbar.hpp"
#include "xbar/mapping/quant.hpp"

namespace xbar::mapping {

/// One crossbar-sized block of a sliced matrix: a positive and a negative
/// conductance matrix per weight slice.
struct Tile {
  std::size_t row_offset = 0;
  std::size_t col_offset = 0;
  std::vector<circuit::ConductanceMatrix> pos;  // [slice]
  std::vector<circuit::ConductanceMatrix> neg;
};

struct TileGrid {
  std::size_t matrix_rows = 0;
  std::size_t matrix_cols = 0;
  std::size_t tile_rows = 0;  // crossbar R
  std::size_t tile_cols = 0;  // crossbar C
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::vector<Tile> tiles;  // row-major over the grid

  const Tile& at(std::size_t gr, std::size_t gc) const { return tiles.at(gr * grid_cols + gc); }
  std::size_t crossbar_count() const;
};

/// Conductance for a slice digit: digit 0 -> 1/r_off, largest digit -> 1/r_on,
/// evenly spaced on the device level grid.
double digit_conductance(int digit, const circuit::DeviceModel& device, const QuantConfig& qc);
/// Conductance change per unit digit.
double digit_step(const circuit::DeviceModel& device, const QuantConfig& qc);
/// All-1/r_off tile: the digit-0 response that is subtracted from every column.
circuit::ConductanceMatrix baseline_matrix(std::size_t rows, std::size_t cols, const circuit::DeviceModel& device);

/// Tiles a sliced (rows x cols) digit matrix onto R x C crossbars. Edge tiles
/// are padded with digit 0.
TileGrid map_matrix_to_tiles(const SlicedDigits& digits, std::size_t tile_rows, std::size_t tile_cols,
                             const circuit::DeviceModel& device, const QuantConfig& qc);

/// Reads conductances back into digits (inverse of the mapping).
SlicedDigits read_back(const TileGrid& grid, const circuit::DeviceModel& device, const QuantConfig& qc);
/// Digit matrix (R x C, row-major) stored on one crossbar.
std::vector<int> read_digits(const circuit::ConductanceMatrix& g, const circuit::DeviceModel& device,
                             const QuantConfig& qc);

}  // namespace xbar::mapping
