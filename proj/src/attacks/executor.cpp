#include "xbar/attacks/executor.hpp"

namespace xbar::attacks {

nn::InputGradient hil_gradient(const mapping::AnalogNetwork& hardware, const nn::Tensor& x,
                               std::span<const int> labels) {
  const nn::Trace trace = hardware.trace(x);
  auto ce = nn::softmax_cross_entropy(trace.output(), labels);
  const double n = static_cast<double>(x.batch());
  for (auto& g : ce.grad.data()) g *= n;  // per-sample gradients, as in loss_and_input_grad
  nn::InputGradient out;
  out.loss = ce.loss * n;
  out.grad_x = hardware.network().backward(trace, ce.grad);
  out.logits = trace.output();
  return out;
}

nn::InputGradient HilGradient::gradient(const nn::Tensor& x, std::span<const int> labels) const {
  return hil_gradient(*hw_, x, labels);
}

}  // namespace xbar::attacks
