#include "xbar/attacks/pgd.hpp"

#include <algorithm>
#include <cmath>

#include "xbar/common/error.hpp"

namespace xbar::attacks {

double project(double value, double origin, double epsilon) {
  return std::clamp(std::clamp(value, origin - epsilon, origin + epsilon), 0.0, 1.0);
}

AdvBatch pgd_attack(const GradientSource& source, const nn::Tensor& x, std::span<const int> labels,
                    const AttackConfig& cfg) {
  cfg.validate();
  if (labels.size() != x.batch()) throw ShapeError("one label per image is required");
  for (double v : x.data())
    if (!(v >= 0.0 && v <= 1.0)) throw RangeError("attack inputs must lie in [0, 1]");
  AdvBatch adv{x, {labels.begin(), labels.end()}, std::vector<std::size_t>(x.batch(), 0),
               std::vector<bool>(x.batch(), false)};
  if (cfg.epsilon == 0.0) return adv;
  for (int it = 0; it < cfg.iters; ++it) {
    const auto g = source.gradient(adv.x_star, labels);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double s = g.grad_x[i] > 0.0 ? 1.0 : (g.grad_x[i] < 0.0 ? -1.0 : 0.0);
      adv.x_star[i] = project(adv.x_star[i] + cfg.alpha * s, x[i], cfg.epsilon);
    }
  }
  return adv;
}

void mark_success(AdvBatch& adv, const nn::LogitsExecutor& target) {
  const auto pred = nn::argmax_rows(target.logits(adv.x_star));
  for (std::size_t i = 0; i < pred.size(); ++i) adv.success[i] = pred[i] != adv.labels[i];
}

double max_perturbation(const nn::Tensor& x_star, const nn::Tensor& x) {
  if (x_star.shape() != x.shape()) throw ShapeError("perturbation needs matching shapes");
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x_star[i] - x[i]));
  return m;
}

}  // namespace xbar::attacks
