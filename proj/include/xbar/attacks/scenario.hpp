#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "xbar/attacks/ensemble.hpp"
#include "xbar/attacks/pgd.hpp"
#include "xbar/attacks/square.hpp"
#include "xbar/attacks/threat.hpp"
#include "xbar/mapping/analog.hpp"
#include "xbar/nn/dataset.hpp"

namespace xbar::attacks {

struct ScenarioParams {
  double epsilon = 8.0 / 255.0;
  int pgd_iters = 30;
  long square_queries = 1000;          // non-adaptive budget per image
  long adaptive_square_queries = 30;   // adaptive budget per image
  std::size_t chunk = 100;             // images per attack batch
  std::uint64_t seed = 0;
};

/// What the attacker can touch. Which fields are read depends on the scenario.
struct AttackerResources {
  const nn::Network* digital = nullptr;                         // the trained model
  std::shared_ptr<const mapping::AnalogNetwork> attacker_hw;    // attacker's crossbar model
  const Ensemble* ensemble = nullptr;                           // pretrained surrogates for this scenario
};

struct ScenarioResult {
  std::string scenario;
  std::string attack;
  double epsilon = 0.0;
  long iters_or_queries = 0;
  std::string target_backend;
  std::string attacker_backend;
  double clean_acc = 0.0;
  double adv_acc = 0.0;
  double delta = 0.0;  // adv_acc - clean_acc on the target
  std::uint64_t seed = 0;
  double mean_queries = 0.0;
};

/// Name of the model the attacker's gradients or queries come from.
std::string attacker_backend_name(const ThreatScenario& s, AttackKind kind, const AttackerResources& res);

/// Crafts adversarial examples for every image of `data` using only what the
/// scenario grants. The result does not depend on the target, so one crafted
/// batch can be evaluated on several targets. Fills the attacker fields of `meta`.
AdvBatch craft_adversarial(const ThreatScenario& scenario, AttackKind kind, const nn::Dataset& data,
                           const ScenarioParams& params, const AttackerResources& res, ScenarioResult* meta = nullptr);

/// Clean and adversarial accuracy of `target`; fills target_backend and the accuracies.
void evaluate_on_target(const nn::LogitsExecutor& target, const nn::Dataset& data, const AdvBatch& adv,
                        ScenarioResult& result, std::size_t chunk = 100);

/// Crafts adversarial examples per the scenario and evaluates them on `target`.
/// `adv_out`, when given, receives every adversarial image in dataset order.
ScenarioResult run_scenario(const ThreatScenario& scenario, AttackKind kind, const nn::LogitsExecutor& target,
                            const nn::Dataset& data, const ScenarioParams& params, const AttackerResources& res,
                            AdvBatch* adv_out = nullptr);

}  // namespace xbar::attacks
