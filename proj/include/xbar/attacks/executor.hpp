#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xbar/mapping/analog.hpp"
#include "xbar/nn/loss.hpp"
#include "xbar/nn/network.hpp"

namespace xbar::attacks {

/// Supplies the cross-entropy input gradient an attacker can compute.
class GradientSource {
 public:
  virtual ~GradientSource() = default;
  virtual nn::InputGradient gradient(const nn::Tensor& x, std::span<const int> labels) const = 0;
  virtual std::string name() const = 0;
};

/// Exact reverse mode through the full-precision digital network.
class DigitalGradient final : public GradientSource {
 public:
  explicit DigitalGradient(const nn::Network& net) : net_(net) {}
  nn::InputGradient gradient(const nn::Tensor& x, std::span<const int> labels) const override {
    return nn::loss_and_input_grad(net_, x, labels);
  }
  std::string name() const override { return "digital"; }

 private:
  const nn::Network& net_;
};

/// Hardware-in-loop: the forward pass runs on the attacker's crossbar model and
/// records every activation; the backward pass applies each layer's ideal
/// derivative at those recorded activations (straight-through for the MVMs).
class HilGradient final : public GradientSource {
 public:
  explicit HilGradient(std::shared_ptr<const mapping::AnalogNetwork> hardware) : hw_(std::move(hardware)) {}
  nn::InputGradient gradient(const nn::Tensor& x, std::span<const int> labels) const override;
  std::string name() const override { return hw_->name(); }

 private:
  std::shared_ptr<const mapping::AnalogNetwork> hw_;
};

nn::InputGradient hil_gradient(const mapping::AnalogNetwork& hardware, const nn::Tensor& x,
                               std::span<const int> labels);

}  // namespace xbar::attacks
