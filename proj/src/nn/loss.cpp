#include "xbar/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "xbar/common/error.hpp"

namespace xbar::nn {

namespace {

void check_labels(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("logits must be [N,K], got " + shape_string(logits.shape()));
  if (labels.size() != logits.batch())
    throw ShapeError(std::to_string(labels.size()) + " labels for " + std::to_string(logits.batch()) + " samples");
  const int k = static_cast<int>(logits.dim(1));
  for (int y : labels)
    if (y < 0 || y >= k) throw RangeError("label " + std::to_string(y) + " outside [0," + std::to_string(k) + ")");
}

}  // namespace

Tensor softmax(const Tensor& logits) {
  Tensor p(logits.shape());
  const std::size_t K = logits.sample_size();
  for (std::size_t n = 0; n < logits.batch(); ++n) {
    const double* z = logits.ptr() + n * K;
    double* q = p.ptr() + n * K;
    const double m = *std::max_element(z, z + K);
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += (q[k] = std::exp(z[k] - m));
    for (std::size_t k = 0; k < K; ++k) q[k] /= s;
  }
  return p;
}

std::vector<double> cross_entropy_per_sample(const Tensor& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  const std::size_t K = logits.dim(1);
  std::vector<double> out(logits.batch());
  for (std::size_t n = 0; n < logits.batch(); ++n) {
    const double* z = logits.ptr() + n * K;
    const double m = *std::max_element(z, z + K);
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(z[k] - m);
    out[n] = m + std::log(s) - z[labels[n]];
  }
  return out;
}

LossOutput softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const auto per = cross_entropy_per_sample(logits, labels);
  LossOutput out;
  const double inv = logits.batch() ? 1.0 / static_cast<double>(logits.batch()) : 0.0;
  for (double l : per) out.loss += l;
  out.loss *= inv;
  out.grad = softmax(logits);
  const std::size_t K = logits.dim(1);
  for (std::size_t n = 0; n < logits.batch(); ++n) {
    out.grad[n * K + static_cast<std::size_t>(labels[n])] -= 1.0;
    for (std::size_t k = 0; k < K; ++k) out.grad[n * K + k] *= inv;
  }
  return out;
}

LossOutput mse(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape())
    throw ShapeError("mse shapes " + shape_string(prediction.shape()) + " vs " + shape_string(target.shape()));
  LossOutput out;
  out.grad = Tensor(prediction.shape());
  const double inv = prediction.size() ? 1.0 / static_cast<double>(prediction.size()) : 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction[i] - target[i];
    out.loss += d * d;
    out.grad[i] = 2.0 * d * inv;
  }
  out.loss *= inv;
  return out;
}

InputGradient loss_and_input_grad(const Network& net, const Tensor& x, std::span<const int> labels,
                                  const AffineHook* hook) {
  const Trace trace = net.forward_trace(x, hook);
  const Tensor& logits = trace.output();
  auto ce = softmax_cross_entropy(logits, labels);
  const double n = static_cast<double>(logits.batch());
  for (auto& g : ce.grad.data()) g *= n;  // undo the batch mean
  InputGradient out;
  out.loss = ce.loss * n;
  out.grad_x = net.backward(trace, ce.grad);
  out.logits = logits;
  return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t K = logits.sample_size();
  std::vector<int> out(logits.batch());
  for (std::size_t n = 0; n < logits.batch(); ++n) {
    const double* z = logits.ptr() + n * K;
    out[n] = static_cast<int>(std::max_element(z, z + K) - z);
  }
  return out;
}

}  // namespace xbar::nn
