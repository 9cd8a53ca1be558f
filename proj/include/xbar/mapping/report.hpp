#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"
#include "xbar/mapping/analog.hpp"

namespace xbar::mapping {

/// Per-layer tile counts, crossbar totals and slice/stream configuration.
nlohmann::json mapping_report(const std::vector<const MappedLayer*>& layers, const QuantConfig& qc);
void write_mapping_report(const std::filesystem::path& path, const nlohmann::json& report);

}  // namespace xbar::mapping
