#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xbar/attacks/scenario.hpp"

namespace xbar::attacks {

/// Header line of the attack result file.
std::string result_csv_header();
std::string result_csv_row(const ScenarioResult& r);
std::string results_to_csv(std::span<const ScenarioResult> rows);
/// Parses a result file produced by results_to_csv; FormatError on bad input.
std::vector<ScenarioResult> results_from_csv(const std::string& text);

void write_results_csv(const std::filesystem::path& path, std::span<const ScenarioResult> rows);
std::vector<ScenarioResult> read_results_csv(const std::filesystem::path& path);

}  // namespace xbar::attacks
