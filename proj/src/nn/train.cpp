#include "xbar/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xbar/common/error.hpp"
#include "xbar/common/rng.hpp"
#include "xbar/nn/loss.hpp"

namespace xbar::nn {

double evaluate_accuracy(const LogitsExecutor& exec, const Dataset& data, std::size_t batch) {
  if (data.empty()) throw RangeError("cannot evaluate accuracy on an empty dataset");
  std::size_t correct = 0;
  for (std::size_t b = 0; b < data.size(); b += batch) {
    const std::size_t n = std::min(batch, data.size() - b);
    const auto pred = argmax_rows(exec.logits(data.images.slice_batch(b, n)));
    for (std::size_t i = 0; i < n; ++i) correct += pred[i] == data.labels[b + i];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void sgd_step(Network& net, const ParamGrads& grads, double lr) {
  auto params = net.params();
  if (params.size() != grads.size()) throw ShapeError("gradient count does not match parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i]->data();
    for (std::size_t j = 0; j < data.size(); ++j) data[j] -= lr * grads[i][j];
  }
}

TrainHistory train_classifier(Network& net, const Dataset& train, const Dataset* test, const TrainOptions& opt,
                              const EpochCallback& on_epoch) {
  if (opt.epochs < 0) throw RangeError("epochs must be non-negative");
  if (opt.batch == 0) throw RangeError("batch size must be positive");
  if (!(opt.lr > 0.0)) throw RangeError("learning rate must be positive");
  if (opt.epochs > 0 && train.empty()) throw RangeError("training set is empty");
  TrainHistory hist;
  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(opt.seed, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += opt.batch) {
      const std::size_t n = std::min(opt.batch, order.size() - b);
      const std::span<const std::size_t> idx(order.data() + b, n);
      const Tensor x = train.images.gather_batch(idx);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = train.labels[idx[i]];
      const Trace trace = net.forward_trace(x);
      const auto ce = softmax_cross_entropy(trace.output(), y);
      if (!std::isfinite(ce.loss)) throw TrainingError("non-finite training loss", epoch);
      ParamGrads grads = net.zero_param_grads();
      net.backward(trace, ce.grad, &grads);
      sgd_step(net, grads, opt.lr);
      loss_sum += ce.loss * static_cast<double>(n);
      const auto pred = argmax_rows(trace.output());
      for (std::size_t i = 0; i < n; ++i) correct += pred[i] == y[i];
    }
    hist.loss.push_back(loss_sum / static_cast<double>(train.size()));
    hist.train_acc.push_back(static_cast<double>(correct) / static_cast<double>(train.size()));
    if (test) hist.test_acc.push_back(evaluate_accuracy(DigitalExecutor(net), *test));
    if (on_epoch) on_epoch(epoch, hist);
  }
  return hist;
}

}  // namespace xbar::nn
