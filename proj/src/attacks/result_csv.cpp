#include "xbar/attacks/result_csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "xbar/common/error.hpp"

namespace xbar::attacks {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("bad " + what + " value '" + s + "' in result file");
  }
}

}  // namespace

std::string result_csv_header() {
  return "scenario,attack,epsilon,iters_or_queries,target_backend,attacker_backend,clean_acc,adv_acc,delta,seed";
}

std::string result_csv_row(const ScenarioResult& r) {
  for (const auto* s : {&r.scenario, &r.attack, &r.target_backend, &r.attacker_backend})
    if (s->find_first_of(",\n") != std::string::npos) throw FormatError("result field contains a separator: " + *s);
  std::ostringstream os;
  os << r.scenario << ',' << r.attack << ',' << fixed(r.epsilon, 8) << ',' << r.iters_or_queries << ','
     << r.target_backend << ',' << r.attacker_backend << ',' << fixed(r.clean_acc, 6) << ','
     << fixed(r.adv_acc, 6) << ',' << fixed(r.delta, 6) << ',' << r.seed;
  return os.str();
}

std::string results_to_csv(std::span<const ScenarioResult> rows) {
  std::string out = result_csv_header() + "\n";
  for (const auto& r : rows) out += result_csv_row(r) + "\n";
  return out;
}

std::vector<ScenarioResult> results_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != result_csv_header()) throw FormatError("result file has an unexpected header");
  std::vector<ScenarioResult> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 10) throw FormatError("result line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
    ScenarioResult r;
    r.scenario = f[0];
    r.attack = f[1];
    r.epsilon = to_double(f[2], "epsilon");
    r.iters_or_queries = static_cast<long>(to_double(f[3], "iters_or_queries"));
    r.target_backend = f[4];
    r.attacker_backend = f[5];
    r.clean_acc = to_double(f[6], "clean_acc");
    r.adv_acc = to_double(f[7], "adv_acc");
    r.delta = to_double(f[8], "delta");
    try {
      r.seed = std::stoull(f[9]);
    } catch (const std::exception&) {
      throw FormatError("bad seed '" + f[9] + "' in result file");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_results_csv(const std::filesystem::path& path, std::span<const ScenarioResult> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << results_to_csv(rows);
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<ScenarioResult> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return results_from_csv(ss.str());
}

}  // namespace xbar::attacks
