#include "xbar/mapping/tiles.hpp"

#include "xbar/common/error.hpp"

namespace xbar::mapping {

std::size_t TileGrid::crossbar_count() const {
  return tiles.empty() ? 0 : tiles.size() * 2 * tiles.front().pos.size();
}

namespace {

int levels_per_digit(const circuit::DeviceModel& device, const QuantConfig& qc) {
  qc.validate(device.levels);
  return (device.levels - 1) / qc.max_slice_digit();
}

}  // namespace

double digit_conductance(int digit, const circuit::DeviceModel& device, const QuantConfig& qc) {
  if (digit < 0 || digit > qc.max_slice_digit())
    throw RangeError("digit " + std::to_string(digit) + " exceeds the representable levels");
  return device.level_conductance(digit * levels_per_digit(device, qc));
}

double digit_step(const circuit::DeviceModel& device, const QuantConfig& qc) {
  return device.level_step() * levels_per_digit(device, qc);
}

circuit::ConductanceMatrix baseline_matrix(std::size_t rows, std::size_t cols, const circuit::DeviceModel& device) {
  return circuit::ConductanceMatrix(rows, cols, device.g_off());
}

TileGrid map_matrix_to_tiles(const SlicedDigits& digits, std::size_t tile_rows, std::size_t tile_cols,
                             const circuit::DeviceModel& device, const QuantConfig& qc) {
  if (tile_rows == 0 || tile_cols == 0) throw ShapeError("tile dimensions must be positive");
  const int per = levels_per_digit(device, qc);
  TileGrid grid;
  grid.matrix_rows = digits.rows;
  grid.matrix_cols = digits.cols;
  grid.tile_rows = tile_rows;
  grid.tile_cols = tile_cols;
  grid.grid_rows = (digits.rows + tile_rows - 1) / tile_rows;
  grid.grid_cols = (digits.cols + tile_cols - 1) / tile_cols;
  const std::size_t slices = digits.pos.size();
  std::vector<int> levels(tile_rows * tile_cols);
  auto program = [&](const std::vector<std::uint8_t>& src, std::size_t r0, std::size_t c0) {
    for (std::size_t i = 0; i < tile_rows; ++i)
      for (std::size_t j = 0; j < tile_cols; ++j) {
        const std::size_t r = r0 + i, c = c0 + j;
        const int d = (r < digits.rows && c < digits.cols) ? src[r * digits.cols + c] : 0;
        if (d > qc.max_slice_digit()) throw RangeError("digit " + std::to_string(d) + " exceeds the representable levels");
        levels[i * tile_cols + j] = d * per;
      }
    return circuit::ConductanceMatrix::from_levels(tile_rows, tile_cols, levels, device);
  };
  for (std::size_t gr = 0; gr < grid.grid_rows; ++gr)
    for (std::size_t gc = 0; gc < grid.grid_cols; ++gc) {
      Tile t;
      t.row_offset = gr * tile_rows;
      t.col_offset = gc * tile_cols;
      for (std::size_t s = 0; s < slices; ++s) {
        t.pos.push_back(program(digits.pos[s], t.row_offset, t.col_offset));
        t.neg.push_back(program(digits.neg[s], t.row_offset, t.col_offset));
      }
      grid.tiles.push_back(std::move(t));
    }
  return grid;
}

std::vector<int> read_digits(const circuit::ConductanceMatrix& g, const circuit::DeviceModel& device,
                             const QuantConfig& qc) {
  const int per = levels_per_digit(device, qc);
  auto levels = g.read_levels(device);
  for (auto& l : levels) {
    if (l % per != 0) throw RangeError("conductance level does not correspond to a slice digit");
    l /= per;
  }
  return levels;
}

SlicedDigits read_back(const TileGrid& grid, const circuit::DeviceModel& device, const QuantConfig& qc) {
  SlicedDigits d;
  d.rows = grid.matrix_rows;
  d.cols = grid.matrix_cols;
  const std::size_t slices = grid.tiles.empty() ? 0 : grid.tiles.front().pos.size();
  d.pos.assign(slices, std::vector<std::uint8_t>(d.rows * d.cols, 0));
  d.neg = d.pos;
  for (const auto& t : grid.tiles)
    for (std::size_t s = 0; s < slices; ++s) {
      const auto p = read_digits(t.pos[s], device, qc);
      const auto n = read_digits(t.neg[s], device, qc);
      for (std::size_t i = 0; i < grid.tile_rows; ++i)
        for (std::size_t j = 0; j < grid.tile_cols; ++j) {
          const std::size_t r = t.row_offset + i, c = t.col_offset + j;
          if (r >= d.rows || c >= d.cols) continue;
          d.pos[s][r * d.cols + c] = static_cast<std::uint8_t>(p[i * grid.tile_cols + j]);
          d.neg[s][r * d.cols + c] = static_cast<std::uint8_t>(n[i * grid.tile_cols + j]);
        }
    }
  return d;
}

}  // namespace xbar::mapping
