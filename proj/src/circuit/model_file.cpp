#include "xbar/circuit/model_file.hpp"

#include <sstream>

#include "xbar/common/container.hpp"
#include "xbar/common/error.hpp"

namespace xbar::circuit {

namespace {

struct PresetRow {
  std::string_view name;
  std::size_t size;
  double r_on;
  double target_nf;
};

constexpr PresetRow kPresets[] = {
    {"64x64_300k", 64, 300e3, 0.07},
    {"32x32_100k", 32, 100e3, 0.14},
    {"64x64_100k", 64, 100e3, 0.26},
};

std::pair<std::size_t, std::size_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    return {std::stoul(s.substr(0, x)), std::stoul(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw ConfigError("crossbar size must look like 64x64, got '" + s + "'");
  }
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

bool is_preset(std::string_view name) {
  for (const auto& p : kPresets)
    if (p.name == name) return true;
  return false;
}

CrossbarModel preset(std::string_view name) {
  for (const auto& p : kPresets) {
    if (p.name != name) continue;
    CrossbarModel m;
    m.name = std::string(p.name);
    m.geometry = {p.size, p.size, kPresetTerminalResistance, kPresetTerminalResistance, 0.0};
    m.device.r_on = p.r_on;
    m.device.r_off = kPresetOffOnRatio * p.r_on;
    m.device.levels = 4;
    m.target_nf = p.target_nf;
    return m;
  }
  throw ConfigError("unknown crossbar preset '" + std::string(name) + "'");
}

std::string to_ini(const CrossbarModel& m) {
  std::ostringstream out;
  out << "[crossbar]\n"
      << "name = " << m.name << "\n"
      << "size = " << m.geometry.rows << "x" << m.geometry.cols << "\n"
      << "r_source = " << format_double(m.geometry.r_source) << "\n"
      << "r_sink = " << format_double(m.geometry.r_sink) << "\n"
      << "r_wire = " << format_double(m.geometry.r_wire) << "\n"
      << "\n[device]\n"
      << "r_on = " << format_double(m.device.r_on) << "\n"
      << "r_off = " << format_double(m.device.r_off) << "\n"
      << "levels = " << m.device.levels << "\n"
      << "v_max = " << format_double(m.device.v_max) << "\n"
      << "nonlinearity = " << to_string(m.device.nonlinearity.kind) << "\n"
      << "beta = " << format_double(m.device.nonlinearity.beta) << "\n";
  if (m.target_nf || m.measured_nf) {
    out << "\n[calibration]\n";
    if (m.target_nf) out << "target_nf = " << format_double(*m.target_nf) << "\n";
    if (m.measured_nf) out << "measured_nf = " << format_double(*m.measured_nf) << "\n";
  }
  return out.str();
}

CrossbarModel model_from_ini(const IniDocument& doc) {
  CrossbarModel m;
  m.name = doc.get_string("crossbar.name", "custom");
  std::tie(m.geometry.rows, m.geometry.cols) = parse_size(doc.get_string("crossbar.size"));
  m.geometry.r_source = doc.get_double("crossbar.r_source");
  m.geometry.r_sink = doc.get_double("crossbar.r_sink");
  m.geometry.r_wire = doc.get_double("crossbar.r_wire");
  m.device.r_on = doc.get_double("device.r_on");
  m.device.r_off = doc.get_double("device.r_off");
  m.device.levels = static_cast<int>(doc.get_int("device.levels"));
  m.device.v_max = doc.get_double("device.v_max", 1.0);
  m.device.nonlinearity.kind = parse_nonlinearity(doc.get_string("device.nonlinearity", "linear"));
  m.device.nonlinearity.beta = doc.get_double("device.beta", 2.0);
  if (doc.has("calibration.target_nf")) m.target_nf = doc.get_double("calibration.target_nf");
  if (doc.has("calibration.measured_nf")) m.measured_nf = doc.get_double("calibration.measured_nf");
  try {
    m.geometry.validate();
    m.device.validate();
  } catch (const Error& e) {
    throw ConfigError(doc.origin() + ": " + e.what());
  }
  return m;
}

CrossbarModel load_model(const std::filesystem::path& path) {
  return model_from_ini(IniDocument::load(path));
}

void save_model(const std::filesystem::path& path, const CrossbarModel& model) {
  write_file_atomic(path, to_ini(model));
}

}  // namespace xbar::circuit
