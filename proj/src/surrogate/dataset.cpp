#include "xbar/surrogate/dataset.hpp"

#include <cmath>

#include "xbar/circuit/calibrate.hpp"
#include "xbar/circuit/nodal.hpp"
#include "xbar/common/error.hpp"

namespace xbar::surrogate {

Normalization Normalization::for_tile(const circuit::CrossbarGeometry& geometry,
                                      const circuit::DeviceModel& device) {
  return {device.v_max, device.r_on, static_cast<double>(geometry.rows) * device.v_max / device.r_on};
}

CircuitDataset generate_dataset(const circuit::CrossbarGeometry& geometry, const circuit::DeviceModel& device,
                                std::size_t n_samples, std::uint64_t seed, const DatasetOptions& options) {
  if (n_samples < 1) throw RangeError("surrogate dataset needs at least one sample");
  if (!(options.validation_fraction >= 0.0 && options.validation_fraction < 1.0))
    throw RangeError("validation fraction must lie in [0, 1)");
  geometry.validate();
  device.validate();
  const std::size_t R = geometry.rows, C = geometry.cols;
  CircuitDataset d;
  d.geometry = geometry;
  d.device = device;
  d.norm = Normalization::for_tile(geometry, device);
  d.v.resize(static_cast<long>(n_samples), static_cast<long>(R));
  d.g.resize(static_cast<long>(n_samples), static_cast<long>(R * C));
  d.current.resize(static_cast<long>(n_samples), static_cast<long>(C));
  const auto held_out = static_cast<std::size_t>(std::floor(options.validation_fraction * double(n_samples)));
  d.train_count = n_samples - held_out;

  circuit::MeshSolver solver(geometry, device);
  circuit::NfSampling plan{n_samples, seed, options.stream_bits};
  std::vector<double> v;
  circuit::ConductanceMatrix g;
  for (std::size_t k = 0; k < n_samples; ++k) {
    circuit::draw_nf_sample(plan, k, geometry, device, v, g);
    const auto s = solver.solve(v, g);
    const long r = static_cast<long>(k);
    for (std::size_t i = 0; i < R; ++i) d.v(r, static_cast<long>(i)) = v[i];
    for (std::size_t i = 0; i < R * C; ++i) d.g(r, static_cast<long>(i)) = g.values()[i];
    for (std::size_t j = 0; j < C; ++j) d.current(r, static_cast<long>(j)) = s.column_currents[j];
  }
  return d;
}

}  // namespace xbar::surrogate
