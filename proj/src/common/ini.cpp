#include "xbar/common/ini.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

#include "xbar/common/error.hpp"

namespace xbar {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& raw, const std::string& what) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(what + ": expected a number, got '" + raw + "'");
  return v;
}

}  // namespace

IniDocument IniDocument::parse(const std::string& text, const std::string& origin) {
  IniDocument doc;
  doc.origin_ = origin;
  std::istringstream in(text);
  try {
    pt::read_ini(in, doc.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return doc;
}

IniDocument IniDocument::load(const std::filesystem::path& path) {
  std::ifstream probe(path);
  if (!probe) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << probe.rdbuf();
  return parse(ss.str(), path.string());
}

bool IniDocument::has(const std::string& key) const {
  return tree_.get_optional<std::string>(key).has_value();
}

bool IniDocument::has_section(const std::string& section) const {
  return tree_.get_child_optional(section).has_value();
}

std::string IniDocument::get_string(const std::string& key) const {
  auto v = tree_.get_optional<std::string>(key);
  if (!v) throw ConfigError(origin_ + ": missing key " + key);
  return trim(*v);
}

std::string IniDocument::get_string(const std::string& key, const std::string& fallback) const {
  auto v = tree_.get_optional<std::string>(key);
  return v ? trim(*v) : fallback;
}

double IniDocument::get_double(const std::string& key) const {
  return to_double(get_string(key), origin_ + ": " + key);
}

double IniDocument::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long long IniDocument::get_int(const std::string& key) const {
  const std::string s = get_string(key);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(origin_ + ": " + key + ": expected an integer, got '" + s + "'");
  return v;
}

long long IniDocument::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool IniDocument::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string s = get_string(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(origin_ + ": " + key + ": expected a boolean, got '" + s + "'");
}

std::vector<std::string> IniDocument::get_list(const std::string& key) const {
  std::vector<std::string> out;
  if (!has(key)) return out;
  std::istringstream in(get_string(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> IniDocument::keys(const std::string& section) const {
  std::vector<std::string> out;
  if (auto child = tree_.get_child_optional(section))
    for (const auto& kv : *child) out.push_back(kv.first);
  return out;
}

std::vector<std::string> IniDocument::sections() const {
  std::vector<std::string> out;
  for (const auto& kv : tree_)
    if (!kv.second.empty()) out.push_back(kv.first);
  return out;
}

double parse_fraction(const std::string& raw, const std::string& what) {
  const std::string s = trim(raw);
  const auto slash = s.find('/');
  if (slash == std::string::npos) return to_double(s, what);
  const double num = to_double(s.substr(0, slash), what);
  const double den = to_double(s.substr(slash + 1), what);
  if (den == 0.0) throw ConfigError(what + ": zero denominator in '" + raw + "'");
  return num / den;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace xbar
