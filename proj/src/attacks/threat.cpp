#include "xbar/attacks/threat.hpp"

#include "xbar/common/error.hpp"

namespace xbar::attacks {

void ThreatScenario::validate() const {
  if (adaptive() && !attacker_crossbar) throw ConfigError("adaptive scenario '" + name + "' needs an attacker crossbar");
  if (!adaptive() && attacker_crossbar)
    throw ConfigError("non-adaptive scenario '" + name + "' cannot use an attacker crossbar");
  if (analog_activations && !knows_weights) throw ConfigError("recording analog activations requires the weights");
}

ThreatScenario scenario_by_name(std::string_view name, std::optional<std::string> attacker_crossbar) {
  ThreatScenario s;
  s.name = std::string(name);
  s.attacker_crossbar = std::move(attacker_crossbar);
  if (name == "nonadaptive-blackbox") {
    s.digital_logits = true;
  } else if (name == "nonadaptive-whitebox") {
    s.knows_weights = s.digital_logits = s.digital_activations = true;
  } else if (name == "adaptive-blackbox") {
    s.analog_logits = true;
  } else if (name == "adaptive-whitebox") {
    s.knows_weights = true;
    s.analog_logits = s.analog_activations = true;
  } else {
    throw ConfigError("unknown threat scenario '" + std::string(name) + "'");
  }
  s.validate();
  return s;
}

std::vector<std::string> scenario_names() {
  return {"nonadaptive-blackbox", "nonadaptive-whitebox", "adaptive-blackbox", "adaptive-whitebox"};
}

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::Pgd: return "pgd";
    case AttackKind::Square: return "square";
    case AttackKind::Ensemble: return "ensemble";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view s) {
  if (s == "pgd") return AttackKind::Pgd;
  if (s == "square") return AttackKind::Square;
  if (s == "ensemble") return AttackKind::Ensemble;
  throw ConfigError("unknown attack '" + std::string(s) + "'");
}

bool attack_allowed(const ThreatScenario& s, AttackKind k) {
  return s.white_box() ? k == AttackKind::Pgd : k != AttackKind::Pgd;
}

AttackConfig AttackConfig::pgd(double epsilon, int iters, std::uint64_t seed) {
  return {epsilon, epsilon / 4.0, iters, seed};
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw RangeError("epsilon must lie in [0, 1]");
  if (!(alpha >= 0.0 && alpha <= epsilon)) throw RangeError("alpha must lie in [0, epsilon]");
  if (iters < 0) throw RangeError("iteration count must be non-negative");
}

}  // namespace xbar::attacks
