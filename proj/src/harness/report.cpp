#include "xbar/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "xbar/common/error.hpp"

namespace xbar::harness {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string nonadaptive_of(const std::string& scenario) {
  if (scenario == "adaptive-whitebox") return "nonadaptive-whitebox";
  if (scenario == "adaptive-blackbox") return "nonadaptive-blackbox";
  return scenario;
}

std::string digital_attacker(const std::string& attack) { return attack == "ensemble" ? "ensemble:digital" : "digital"; }

bool same_eps(double a, double b) { return std::abs(a - b) <= 1e-9; }

}  // namespace

std::vector<GainRow> gain_vs_nf(std::span<const attacks::ScenarioResult> rows, const std::map<std::string, double>& nf) {
  std::vector<GainRow> out;
  for (const auto& r : rows) {
    if (r.target_backend == "digital") continue;
    const std::string base_scenario = nonadaptive_of(r.scenario);
    const auto base = std::find_if(rows.begin(), rows.end(), [&](const attacks::ScenarioResult& b) {
      return b.target_backend == "digital" && b.scenario == base_scenario && b.attack == r.attack &&
             b.attacker_backend == digital_attacker(r.attack) && same_eps(b.epsilon, r.epsilon);
    });
    if (base == rows.end())
      throw ReportError("no digital baseline for " + r.scenario + "/" + r.attack + " at epsilon " + fixed(r.epsilon, 8));
    const auto it = nf.find(r.target_backend);
    if (it == nf.end()) throw ReportError("no measured NF for backend '" + r.target_backend + "'");
    out.push_back({r.scenario, r.attack, r.attacker_backend, r.target_backend, r.epsilon, it->second, r.adv_acc,
                   base->adv_acc, r.adv_acc - base->adv_acc});
  }
  std::stable_sort(out.begin(), out.end(), [](const GainRow& a, const GainRow& b) {
    return std::tie(a.scenario, a.attack, a.attacker_backend, a.epsilon, a.nf) <
           std::tie(b.scenario, b.attack, b.attacker_backend, b.epsilon, b.nf);
  });
  return out;
}

std::string gain_csv(std::span<const GainRow> rows) {
  std::ostringstream os;
  os << "scenario,attack,attacker_backend,epsilon,target_backend,nf,adv_acc,baseline_adv_acc,gain\n";
  for (const auto& g : rows)
    os << g.scenario << ',' << g.attack << ',' << g.attacker_backend << ',' << fixed(g.epsilon, 8) << ','
       << g.target_backend << ',' << fixed(g.nf, 6) << ',' << fixed(g.adv_acc, 6) << ','
       << fixed(g.baseline_adv_acc, 6) << ',' << fixed(g.gain, 6) << '\n';
  return os.str();
}

std::string accuracy_vs_epsilon_csv(std::span<const attacks::ScenarioResult> rows) {
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::vector<Key> order;
  for (const auto& r : rows) {
    Key k{r.scenario, r.attack, r.attacker_backend, r.target_backend};
    if (std::find(order.begin(), order.end(), k) == order.end()) order.push_back(k);
  }
  std::ostringstream os;
  os << "scenario,attack,attacker_backend,target_backend,epsilon,clean_acc,adv_acc\n";
  for (const auto& k : order) {
    std::vector<const attacks::ScenarioResult*> block;
    for (const auto& r : rows)
      if (Key{r.scenario, r.attack, r.attacker_backend, r.target_backend} == k) block.push_back(&r);
    std::stable_sort(block.begin(), block.end(), [](auto* a, auto* b) { return a->epsilon < b->epsilon; });
    for (const auto* r : block)
      os << r->scenario << ',' << r->attack << ',' << r->attacker_backend << ',' << r->target_backend << ','
         << fixed(r->epsilon, 8) << ',' << fixed(r->clean_acc, 6) << ',' << fixed(r->adv_acc, 6) << '\n';
  }
  return os.str();
}

}  // namespace xbar::harness
