#pragma once

#include <span>
#include <vector>

#include "xbar/nn/network.hpp"
#include "xbar/nn/tensor.hpp"

namespace xbar::nn {

struct LossOutput {
  double loss = 0.0;
  Tensor grad;  // d loss / d prediction
};

/// Row-wise softmax of a [N,K] logit tensor (log-sum-exp stabilized).
Tensor softmax(const Tensor& logits);
/// Per-sample cross-entropy; throws RangeError on an invalid label.
std::vector<double> cross_entropy_per_sample(const Tensor& logits, std::span<const int> labels);
/// Mean cross-entropy over the batch and its gradient.
LossOutput softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);
/// Mean squared error over all elements.
LossOutput mse(const Tensor& prediction, const Tensor& target);

struct InputGradient {
  double loss = 0.0;  // summed over the batch, so each sample's row is its own gradient
  Tensor grad_x;
  Tensor logits;
};

InputGradient loss_and_input_grad(const Network& net, const Tensor& x, std::span<const int> labels,
                                  const AffineHook* hook = nullptr);

std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace xbar::nn
