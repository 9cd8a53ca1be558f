#pragma once

#include <string>
#include <string_view>

namespace xbar::circuit {

enum class NonlinearityKind { Linear, ExponentialIV };

std::string_view to_string(NonlinearityKind k);
NonlinearityKind parse_nonlinearity(std::string_view s);

struct Nonlinearity {
  NonlinearityKind kind = NonlinearityKind::Linear;
  double beta = 2.0;
};

/// Programmable resistive device. Conductance levels are evenly spaced between
/// 1/r_off and 1/r_on. Exponential devices follow
///   I = G * v_max * sinh(beta * V / v_max) / sinh(beta)
/// which coincides with the linear device at V = 0 and V = v_max.
struct DeviceModel {
  double r_on = 100e3;
  double r_off = 1e6;
  int levels = 4;
  Nonlinearity nonlinearity{};
  double v_max = 1.0;

  void validate() const;

  double g_on() const { return 1.0 / r_on; }
  double g_off() const { return 1.0 / r_off; }
  /// Conductance spacing between adjacent levels.
  double level_step() const { return (g_on() - g_off()) / (levels - 1); }
  double level_conductance(int k) const { return g_off() + k * level_step(); }

  bool is_linear() const { return nonlinearity.kind == NonlinearityKind::Linear; }
  double current(double g, double v_device) const;
  /// current(g, v) / v, continuous through v = 0.
  double effective_conductance(double g, double v_device) const;
};

}  // namespace xbar::circuit
