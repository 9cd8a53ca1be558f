#pragma once

#include <span>
#include <vector>

#include "xbar/attacks/executor.hpp"
#include "xbar/attacks/threat.hpp"
#include "xbar/nn/train.hpp"

namespace xbar::attacks {

/// A batch of adversarial examples (one AdvExample per row).
struct AdvBatch {
  nn::Tensor x_star;
  std::vector<int> labels;
  std::vector<std::size_t> queries;  // executor queries spent per image (0 for gradient attacks)
  std::vector<bool> success;         // misclassified by the evaluating executor
};

/// Projection onto [x - eps, x + eps] intersected with [0, 1].
double project(double value, double origin, double epsilon);

/// x <- proj(x + alpha * sign(grad)) for cfg.iters steps, no random start.
AdvBatch pgd_attack(const GradientSource& source, const nn::Tensor& x, std::span<const int> labels,
                    const AttackConfig& cfg);

/// Marks success[i] = target misclassifies x_star[i].
void mark_success(AdvBatch& adv, const nn::LogitsExecutor& target);

/// Largest |x_star - x| over the batch.
double max_perturbation(const nn::Tensor& x_star, const nn::Tensor& x);

}  // namespace xbar::attacks
