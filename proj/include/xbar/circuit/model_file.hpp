#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xbar/circuit/crossbar.hpp"
#include "xbar/common/ini.hpp"

namespace xbar::circuit {

/// A named crossbar tile: geometry, device and (after calibration) the NF it
/// was tuned to.
struct CrossbarModel {
  std::string name;
  CrossbarGeometry geometry;
  DeviceModel device;
  std::optional<double> target_nf;
  std::optional<double> measured_nf;
};

inline constexpr double kPresetTerminalResistance = 250.0;  // ohm, r_source and r_sink
inline constexpr double kPresetOffOnRatio = 10.0;

/// `64x64_300k`, `32x32_100k`, `64x64_100k`. r_wire is left at zero; run
/// calibration to reach each preset's target NF (0.07 / 0.14 / 0.26).
CrossbarModel preset(std::string_view name);
std::vector<std::string> preset_names();
bool is_preset(std::string_view name);

std::string to_ini(const CrossbarModel& model);
CrossbarModel model_from_ini(const IniDocument& doc);
CrossbarModel load_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const CrossbarModel& model);

}  // namespace xbar::circuit
