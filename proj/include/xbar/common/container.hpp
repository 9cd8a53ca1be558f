#pragma once

// Versioned binary container used for model and surrogate checkpoints and the
// adversarial archive. Layout:
//   "XBARCKPT" | u32 version | u64 header bytes | JSON header | f64 payload
// The JSON header lists every array (name, shape, element offset) so files are
// self-describing; the payload is little-endian IEEE doubles.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace xbar {

inline constexpr std::uint32_t kContainerVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

struct Container {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray& array(const std::string& name) const;
  void add(std::string name, std::vector<std::size_t> shape, std::vector<double> data);
};

std::string serialize_container(const Container& c);
Container deserialize_container(const std::string& bytes);

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

/// Writes `content` next to `path` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace xbar
