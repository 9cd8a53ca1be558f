#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xbar::attacks {

/// Attacker knowledge, one row of the threat-scenario table.
struct ThreatScenario {
  std::string name;
  bool knows_weights = false;
  bool digital_logits = false;
  bool digital_activations = false;
  std::optional<std::string> attacker_crossbar;  // crossbar preset the attacker models
  bool analog_logits = false;
  bool analog_activations = false;

  bool adaptive() const { return analog_logits || analog_activations; }
  bool white_box() const { return knows_weights; }
  void validate() const;
};

/// The four rows: nonadaptive-blackbox, nonadaptive-whitebox,
/// adaptive-blackbox and adaptive-whitebox. Adaptive rows need a crossbar.
ThreatScenario scenario_by_name(std::string_view name, std::optional<std::string> attacker_crossbar = std::nullopt);
std::vector<std::string> scenario_names();

enum class AttackKind { Pgd, Square, Ensemble };

std::string to_string(AttackKind k);
AttackKind parse_attack_kind(std::string_view s);
/// White-box rows run PGD; black-box rows run Square or the ensemble attack.
bool attack_allowed(const ThreatScenario& s, AttackKind k);

/// l-inf PGD settings. Defaults follow alpha = epsilon / 4, 30 iterations.
struct AttackConfig {
  double epsilon = 0.0;
  double alpha = 0.0;
  int iters = 30;
  std::uint64_t seed = 0;

  static AttackConfig pgd(double epsilon, int iters = 30, std::uint64_t seed = 0);
  void validate() const;
};

}  // namespace xbar::attacks
