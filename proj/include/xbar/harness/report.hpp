#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "xbar/attacks/scenario.hpp"

namespace xbar::harness {

/// One point of the gain-vs-NF curve.
struct GainRow {
  std::string scenario, attack, attacker_backend, target_backend;
  double epsilon = 0.0;
  double nf = 0.0;
  double adv_acc = 0.0;
  double baseline_adv_acc = 0.0;
  double gain = 0.0;  // adv_acc - baseline_adv_acc
};

/// For every crossbar-target row, the baseline is the non-adaptive variant of
/// the same attack at the same epsilon evaluated on the digital target.
/// `nf` maps target backend names to their measured NF. ReportError when a
/// baseline or an NF is missing.
std::vector<GainRow> gain_vs_nf(std::span<const attacks::ScenarioResult> rows, const std::map<std::string, double>& nf);

std::string gain_csv(std::span<const GainRow> rows);
/// Accuracy-vs-epsilon curves: one block per (scenario, attack, attacker, target)
/// in first-appearance order, epsilons ascending.
std::string accuracy_vs_epsilon_csv(std::span<const attacks::ScenarioResult> rows);

}  // namespace xbar::harness
