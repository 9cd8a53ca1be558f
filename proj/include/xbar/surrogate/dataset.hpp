#pragma once

#include <cstdint>

#include "xbar/circuit/crossbar.hpp"
#include "xbar/nn/tensor.hpp"

namespace xbar::surrogate {

/// Feature and target scales: v / v_max, g * r_on, current / (R * v_max / r_on).
struct Normalization {
  double v_scale = 1.0;
  double g_scale = 1.0;
  double i_scale = 1.0;

  static Normalization for_tile(const circuit::CrossbarGeometry& geometry, const circuit::DeviceModel& device);
};

/// Circuit samples for one geometry. Rows [0, train_count) form the training
/// split; the rest is held out for validation.
struct CircuitDataset {
  circuit::CrossbarGeometry geometry;
  circuit::DeviceModel device;
  Normalization norm;
  nn::RowMatrix v;        // N x R, volts
  nn::RowMatrix g;        // N x R*C, siemens (row-major per sample)
  nn::RowMatrix current;  // N x C, amperes from the mesh solver
  std::size_t train_count = 0;

  std::size_t size() const { return static_cast<std::size_t>(v.rows()); }
  std::size_t validation_count() const { return size() - train_count; }
};

struct DatasetOptions {
  double validation_fraction = 0.1;
  int stream_bits = 1;
};

/// V uniform over the stream voltage levels, G uniform over the device grid,
/// targets from the non-ideal mesh solve. Sample k uses RNG stream (seed, k).
CircuitDataset generate_dataset(const circuit::CrossbarGeometry& geometry, const circuit::DeviceModel& device,
                                std::size_t n_samples, std::uint64_t seed, const DatasetOptions& options = {});

}  // namespace xbar::surrogate
