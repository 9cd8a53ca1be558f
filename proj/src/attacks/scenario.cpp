#include "xbar/attacks/scenario.hpp"

#include "xbar/common/error.hpp"

namespace xbar::attacks {

namespace {

void require_digital(const AttackerResources& res) {
  if (!res.digital) throw ConfigError("scenario needs the digital model");
}

void require_hw(const ThreatScenario& s, const AttackerResources& res) {
  if (!res.attacker_hw) throw ConfigError("scenario '" + s.name + "' needs the attacker's crossbar model");
}

}  // namespace

std::string attacker_backend_name(const ThreatScenario& s, AttackKind kind, const AttackerResources& res) {
  std::string base = "digital";
  if (s.adaptive()) {
    require_hw(s, res);
    base = res.attacker_hw->name();
  }
  return kind == AttackKind::Ensemble ? "ensemble:" + base : base;
}

AdvBatch craft_adversarial(const ThreatScenario& scenario, AttackKind kind, const nn::Dataset& data,
                           const ScenarioParams& params, const AttackerResources& res, ScenarioResult* meta) {
  scenario.validate();
  data.validate();
  if (data.empty()) throw RangeError("attack dataset is empty");
  if (!attack_allowed(scenario, kind))
    throw ConfigError("attack '" + to_string(kind) + "' does not fit scenario '" + scenario.name + "'");
  if (params.chunk == 0) throw RangeError("chunk size must be positive");

  // Attacker-side sources, selected by the scenario flags.
  std::unique_ptr<GradientSource> grad;
  std::unique_ptr<nn::LogitsExecutor> digital_exec;
  const nn::LogitsExecutor* query = nullptr;
  long budget = params.pgd_iters;
  switch (kind) {
    case AttackKind::Pgd:
      if (scenario.adaptive()) {
        require_hw(scenario, res);
        grad = std::make_unique<HilGradient>(res.attacker_hw);
      } else {
        require_digital(res);
        grad = std::make_unique<DigitalGradient>(*res.digital);
      }
      break;
    case AttackKind::Square:
      if (scenario.adaptive()) {
        require_hw(scenario, res);
        query = res.attacker_hw.get();
        budget = params.adaptive_square_queries;
      } else {
        require_digital(res);
        digital_exec = std::make_unique<nn::DigitalExecutor>(*res.digital);
        query = digital_exec.get();
        budget = params.square_queries;
      }
      break;
    case AttackKind::Ensemble:
      if (!res.ensemble) throw ConfigError("ensemble attack needs a trained surrogate ensemble");
      grad = std::make_unique<EnsembleGradient>(*res.ensemble);
      break;
  }
  if (meta) {
    meta->scenario = scenario.name;
    meta->attack = to_string(kind);
    meta->epsilon = params.epsilon;
    meta->iters_or_queries = budget;
    meta->attacker_backend = attacker_backend_name(scenario, kind, res);
    meta->seed = params.seed;
  }

  const auto cfg = AttackConfig::pgd(params.epsilon, params.pgd_iters, params.seed);
  std::vector<nn::Tensor> parts;
  AdvBatch out;
  for (std::size_t b = 0; b < data.size(); b += params.chunk) {
    const auto part = data.slice(b, std::min(params.chunk, data.size() - b));
    AdvBatch adv;
    if (kind == AttackKind::Square) {
      adv = square_attack(*query, part.images, part.labels, {params.epsilon, budget, 0.1, params.seed, b});
    } else {
      adv = pgd_attack(*grad, part.images, part.labels, cfg);
    }
    parts.push_back(std::move(adv.x_star));
    out.queries.insert(out.queries.end(), adv.queries.begin(), adv.queries.end());
  }
  out.x_star = nn::concat_batch(parts);
  out.labels = data.labels;
  out.success.assign(data.size(), false);
  if (meta) {
    double q = 0.0;
    for (auto v : out.queries) q += static_cast<double>(v);
    meta->mean_queries = q / static_cast<double>(data.size());
  }
  return out;
}

void evaluate_on_target(const nn::LogitsExecutor& target, const nn::Dataset& data, const AdvBatch& adv,
                        ScenarioResult& result, std::size_t chunk) {
  if (adv.x_star.shape() != data.images.shape()) throw ShapeError("adversarial batch does not match the dataset");
  if (data.empty()) throw RangeError("attack dataset is empty");
  std::size_t clean = 0, robust = 0;
  for (std::size_t b = 0; b < data.size(); b += chunk) {
    const std::size_t m = std::min(chunk, data.size() - b);
    const auto cp = nn::argmax_rows(target.logits(data.images.slice_batch(b, m)));
    const auto ap = nn::argmax_rows(target.logits(adv.x_star.slice_batch(b, m)));
    for (std::size_t i = 0; i < m; ++i) {
      clean += cp[i] == data.labels[b + i];
      robust += ap[i] == data.labels[b + i];
    }
  }
  const double n = static_cast<double>(data.size());
  result.target_backend = target.name();
  result.clean_acc = static_cast<double>(clean) / n;
  result.adv_acc = static_cast<double>(robust) / n;
  result.delta = result.adv_acc - result.clean_acc;
}

ScenarioResult run_scenario(const ThreatScenario& scenario, AttackKind kind, const nn::LogitsExecutor& target,
                            const nn::Dataset& data, const ScenarioParams& params, const AttackerResources& res,
                            AdvBatch* adv_out) {
  ScenarioResult r;
  auto adv = craft_adversarial(scenario, kind, data, params, res, &r);
  evaluate_on_target(target, data, adv, r, params.chunk);
  mark_success(adv, target);
  if (adv_out) *adv_out = std::move(adv);
  return r;
}

}  // namespace xbar::attacks
