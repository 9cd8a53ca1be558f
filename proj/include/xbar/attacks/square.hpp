#pragma once

#include <cstdint>
#include <span>

#include "xbar/attacks/pgd.hpp"
#include "xbar/nn/train.hpp"

namespace xbar::attacks {

struct SquareOptions {
  double epsilon = 0.0;
  long max_queries = 1000;  // per image; the initialization counts as one query
  double p_init = 0.1;
  std::uint64_t seed = 0;
  std::size_t index_offset = 0;  // global index of the first image, selects its rng stream
};

/// Margin the attacker maximizes: max_{k != y} logit_k - logit_y. Positive
/// exactly when the image is misclassified.
double margin_loss(std::span<const double> logits, int label);

/// Patch side for query i of a budget: ceil(sqrt(p * H * W)) with p halved at
/// 5%, 20% and 50% of the budget, clamped to [1, min(H, W)].
std::size_t square_side(double p_init, long query, long budget, std::size_t h, std::size_t w);

/// Optional per-image record of accepted losses (strictly increasing).
using AcceptLog = std::vector<std::vector<double>>;

/// Random-search l-inf attack that only reads logits from `exec`.
AdvBatch square_attack(const nn::LogitsExecutor& exec, const nn::Tensor& x, std::span<const int> labels,
                       const SquareOptions& opt, AcceptLog* log = nullptr);

}  // namespace xbar::attacks
