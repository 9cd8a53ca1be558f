#pragma once

#include <filesystem>

#include "json.hpp"
#include "xbar/common/container.hpp"
#include "xbar/nn/network.hpp"

namespace xbar::nn {

/// Architecture description in the header, one array per parameter.
Container network_to_container(const Network& net, const nlohmann::json& extra_meta = nlohmann::json::object());
Network network_from_container(const Container& c);

void save_network(const std::filesystem::path& path, const Network& net,
                  const nlohmann::json& extra_meta = nlohmann::json::object());
Network load_network(const std::filesystem::path& path);

}  // namespace xbar::nn
