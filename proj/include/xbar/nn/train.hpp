#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xbar/nn/dataset.hpp"
#include "xbar/nn/network.hpp"

namespace xbar::nn {

/// Anything that maps an image batch to logits: the digital network, an
/// analog execution of it, or a black-box target.
class LogitsExecutor {
 public:
  virtual ~LogitsExecutor() = default;
  virtual Tensor logits(const Tensor& x) const = 0;
  virtual std::string name() const = 0;
};

class DigitalExecutor final : public LogitsExecutor {
 public:
  explicit DigitalExecutor(const Network& net) : net_(net) {}
  Tensor logits(const Tensor& x) const override { return net_.forward(x); }
  std::string name() const override { return "digital"; }

 private:
  const Network& net_;
};

/// Fraction of correctly classified samples; RangeError on an empty dataset.
double evaluate_accuracy(const LogitsExecutor& exec, const Dataset& data, std::size_t batch = 256);

struct TrainOptions {
  int epochs = 10;
  double lr = 0.05;
  std::size_t batch = 64;
  std::uint64_t seed = 1;
};

struct TrainHistory {
  std::vector<double> loss;       // mean training loss per epoch
  std::vector<double> train_acc;  // running accuracy over the epoch's batches
  std::vector<double> test_acc;   // empty when no test set was given
};

using EpochCallback = std::function<void(int epoch, const TrainHistory&)>;

/// Plain mini-batch SGD on softmax cross-entropy. Shuffling is derived from
/// `seed`; a non-finite loss raises TrainingError with the epoch index.
TrainHistory train_classifier(Network& net, const Dataset& train, const Dataset* test, const TrainOptions& opt,
                              const EpochCallback& on_epoch = {});

/// One SGD step: p -= lr * g for every parameter.
void sgd_step(Network& net, const ParamGrads& grads, double lr);

}  // namespace xbar::nn
