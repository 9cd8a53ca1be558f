#include "xbar/circuit/device.hpp"

#include <cmath>

#include "xbar/common/error.hpp"

namespace xbar::circuit {

std::string_view to_string(NonlinearityKind k) {
  return k == NonlinearityKind::Linear ? "linear" : "exponential-iv";
}

NonlinearityKind parse_nonlinearity(std::string_view s) {
  if (s == "linear") return NonlinearityKind::Linear;
  if (s == "exponential-iv" || s == "exponential") return NonlinearityKind::ExponentialIV;
  throw ConfigError("unknown device nonlinearity '" + std::string(s) + "'");
}

void DeviceModel::validate() const {
  if (!(r_on > 0.0) || !(r_off > r_on) || !std::isfinite(r_off))
    throw RangeError("device requires r_off > r_on > 0");
  if (levels < 2) throw RangeError("device requires at least 2 conductance levels");
  if (!(v_max > 0.0)) throw RangeError("device v_max must be positive");
  if (nonlinearity.kind == NonlinearityKind::ExponentialIV && !(nonlinearity.beta > 0.0))
    throw RangeError("exponential-iv beta must be positive");
}

double DeviceModel::current(double g, double v) const {
  if (is_linear()) return g * v;
  const double b = nonlinearity.beta;
  return g * v_max * std::sinh(b * v / v_max) / std::sinh(b);
}

double DeviceModel::effective_conductance(double g, double v) const {
  if (is_linear()) return g;
  const double b = nonlinearity.beta;
  const double x = b * v / v_max;
  // sinh(x)/x -> 1 as x -> 0; the series keeps full precision near zero.
  const double sinhc = std::abs(x) < 1e-4 ? 1.0 + x * x / 6.0 : std::sinh(x) / x;
  return g * b * sinhc / std::sinh(b);
}

}  // namespace xbar::circuit
