#include "xbar/circuit/calibrate.hpp"

#include <cmath>
#include <string>

#include "xbar/circuit/nodal.hpp"
#include "xbar/common/error.hpp"
#include "xbar/common/rng.hpp"

namespace xbar::circuit {

void draw_nf_sample(const NfSampling& plan, std::size_t k, const CrossbarGeometry& geometry,
                    const DeviceModel& device, std::vector<double>& v, ConductanceMatrix& g) {
  auto rng = make_rng(plan.seed, k);
  const int stream_levels = (1 << plan.stream_bits) - 1;
  std::uniform_int_distribution<int> pick_stream(0, stream_levels);
  std::uniform_int_distribution<int> pick_level(0, device.levels - 1);
  v.resize(geometry.rows);
  for (auto& x : v) x = device.v_max * pick_stream(rng) / stream_levels;
  std::vector<int> levels(geometry.rows * geometry.cols);
  for (auto& l : levels) l = pick_level(rng);
  g = ConductanceMatrix::from_levels(geometry.rows, geometry.cols, levels, device);
}

std::vector<CurrentPair> sample_current_pairs(const CrossbarGeometry& geometry,
                                              const DeviceModel& device, const NfSampling& plan) {
  MeshSolver solver(geometry, device);
  std::vector<CurrentPair> pairs;
  pairs.reserve(plan.samples);
  std::vector<double> v;
  ConductanceMatrix g;
  for (std::size_t k = 0; k < plan.samples; ++k) {
    draw_nf_sample(plan, k, geometry, device, v, g);
    pairs.push_back({ideal_mvm(v, g), solver.solve(v, g).column_currents});
  }
  return pairs;
}

double measure_nf(const CrossbarGeometry& geometry, const DeviceModel& device,
                  const NfSampling& plan) {
  return nonideality_factor(sample_current_pairs(geometry, device, plan));
}

CalibrationResult calibrate_geometry(double target_nf, const CrossbarGeometry& base,
                                     const DeviceModel& device, const CalibrationOptions& options) {
  base.validate();
  device.validate();
  CalibrationResult result;
  result.geometry = base;
  if (target_nf == 0.0) {
    result.geometry.r_wire = 0.0;
    result.measured_nf = measure_nf(result.geometry, device, options.sampling);
    result.evaluations = 1;
    return result;
  }
  if (!(target_nf > 0.0 && target_nf < 0.5))
    throw RangeError("calibration target NF must lie in (0, 0.5)");

  auto nf_at = [&](double r_wire) {
    CrossbarGeometry g = base;
    g.r_wire = r_wire;
    ++result.evaluations;
    return measure_nf(g, device, options.sampling);
  };

  double best_r = 0.0;
  double best_nf = nf_at(0.0);
  auto consider = [&](double r, double nf) {
    if (std::abs(nf - target_nf) < std::abs(best_nf - target_nf)) {
      best_r = r;
      best_nf = nf;
    }
  };
  const double floor_nf = best_nf;
  if (floor_nf > target_nf + options.tolerance)
    throw CalibrationError("target NF " + std::to_string(target_nf) +
                               " is below the floor set by r_source/r_sink (" +
                               std::to_string(floor_nf) + ")",
                           floor_nf, floor_nf);

  double lo = 0.0;
  double hi = 1.0;
  double nf_hi = nf_at(hi);
  consider(hi, nf_hi);
  while (nf_hi < target_nf) {
    lo = hi;
    hi *= 2.0;
    if (hi > options.r_wire_max)
      throw CalibrationError("target NF " + std::to_string(target_nf) +
                                 " unreachable with r_wire <= " + std::to_string(options.r_wire_max),
                             floor_nf, nf_hi);
    nf_hi = nf_at(hi);
    consider(hi, nf_hi);
  }

  while (std::abs(best_nf - target_nf) > options.stop_tolerance &&
         result.evaluations < options.max_evaluations) {
    const double mid = 0.5 * (lo + hi);
    const double nf = nf_at(mid);
    consider(mid, nf);
    (nf < target_nf ? lo : hi) = mid;
  }
  if (std::abs(best_nf - target_nf) > options.tolerance)
    throw CalibrationError("bisection stalled at NF " + std::to_string(best_nf), floor_nf, nf_hi);
  result.geometry.r_wire = best_r;
  result.measured_nf = best_nf;
  return result;
}

}  // namespace xbar::circuit
