#pragma once

#include <cstdint>
#include <vector>

#include "xbar/circuit/crossbar.hpp"
#include "xbar/circuit/nonideality.hpp"

namespace xbar::circuit {

/// How NF is sampled: V uniform over input-stream voltage levels, G uniform
/// over the device level grid. Sample k always draws from stream (seed, k), so
/// repeated measurements on different geometries see the same (V, G) set.
struct NfSampling {
  std::size_t samples = 200;
  std::uint64_t seed = 2020;
  int stream_bits = 1;
};

/// Draws sample k of the sampling plan.
void draw_nf_sample(const NfSampling& plan, std::size_t k, const CrossbarGeometry& geometry,
                    const DeviceModel& device, std::vector<double>& v, ConductanceMatrix& g);

std::vector<CurrentPair> sample_current_pairs(const CrossbarGeometry& geometry,
                                              const DeviceModel& device, const NfSampling& plan);

double measure_nf(const CrossbarGeometry& geometry, const DeviceModel& device,
                  const NfSampling& plan);

struct CalibrationOptions {
  NfSampling sampling{};
  double tolerance = 0.01;        // accepted |NF - target|
  double stop_tolerance = 0.002;  // bisection stops once this close
  double r_wire_max = 1e4;
  int max_evaluations = 60;
};

struct CalibrationResult {
  CrossbarGeometry geometry;
  double measured_nf = 0.0;
  int evaluations = 0;
};

/// Tunes r_wire (size, r_source, r_sink and the device are held fixed) until
/// the sampled NF matches `target_nf`. Throws CalibrationError with the
/// achievable NF range when the target is outside it.
CalibrationResult calibrate_geometry(double target_nf, const CrossbarGeometry& base,
                                     const DeviceModel& device,
                                     const CalibrationOptions& options = {});

}  // namespace xbar::circuit
