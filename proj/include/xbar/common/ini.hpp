#pragma once

// Thin wrapper over boost::property_tree's INI reader with typed lookups that
// raise ConfigError naming the offending section.key.

#include <boost/property_tree/ptree.hpp>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace xbar {

class IniDocument {
 public:
  static IniDocument parse(const std::string& text, const std::string& origin = "<string>");
  static IniDocument load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  bool has_section(const std::string& section) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list; surrounding whitespace trimmed, empty items dropped.
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<std::string> keys(const std::string& section) const;
  std::vector<std::string> sections() const;  // file order

  const std::string& origin() const { return origin_; }

 private:
  boost::property_tree::ptree tree_;
  std::string origin_;
};

/// Parses "16/255", "0.0627", "1e-2". Throws ConfigError on junk.
double parse_fraction(const std::string& text, const std::string& what);

std::string format_double(double v);  // shortest text that round-trips

}  // namespace xbar
