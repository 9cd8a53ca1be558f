#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "xbar/nn/layers.hpp"
#include "xbar/nn/tensor.hpp"

namespace xbar::nn {

/// Residual connection: activation `from` (0 = network input, k = output of
/// layer k-1) is added to the output of layer `to`. Requires from <= to.
struct Skip {
  std::size_t from;
  std::size_t to;
  bool operator==(const Skip&) const = default;
};

/// activations[k] is the input of layer k; activations.back() is the output.
struct Trace {
  std::vector<Tensor> activations;
  const Tensor& output() const { return activations.back(); }
};

/// Replaces the evaluation of affine layers (linear, conv2d) during forward.
/// Used to run those layers on crossbars while keeping the digital graph.
class AffineHook {
 public:
  virtual ~AffineHook() = default;
  virtual Tensor apply(std::size_t layer_index, const Layer& layer, const Tensor& x) const = 0;
};

using ParamGrads = std::vector<AlignedVector>;

class Network {
 public:
  explicit Network(Shape input_shape = {});
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  Network& add(std::unique_ptr<Layer> layer);
  template <class L, class... Args>
  Network& emplace(Args&&... args) {
    return add(std::make_unique<L>(std::forward<Args>(args)...));
  }
  Network& add_skip(std::size_t from, std::size_t to);

  const Shape& input_shape() const { return input_shape_; }
  Shape output_shape() const;
  /// Per-sample shapes of every activation; throws ShapeError if layers do not compose.
  std::vector<Shape> activation_shapes() const;
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t k) { return *layers_.at(k); }
  const Layer& layer(std::size_t k) const { return *layers_.at(k); }
  const std::vector<Skip>& skips() const { return skips_; }

  Tensor forward(const Tensor& x, const AffineHook* hook = nullptr) const;
  Trace forward_trace(const Tensor& x, const AffineHook* hook = nullptr) const;
  /// Reverse pass over a recorded trace. Returns dL/dx; accumulates parameter
  /// gradients into `param_grads` (params() order) when given.
  Tensor backward(const Trace& trace, const Tensor& grad_output, ParamGrads* param_grads = nullptr) const;

  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
  std::vector<std::string> param_names() const;
  std::size_t parameter_count() const;
  ParamGrads zero_param_grads() const;

  /// Fan-in scaled uniform initialization, deterministic in `seed`.
  void init(std::uint64_t seed);

  nlohmann::json describe() const;
  static Network from_description(const nlohmann::json& j);

 private:
  void check_input(const Tensor& x) const;

  Shape input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Skip> skips_;
};

/// conv(k3,pad1)-relu-avgpool2 blocks followed by an MLP head.
struct CnnSpec {
  Shape input{1, 16, 16};
  std::vector<std::size_t> conv_channels{8, 16};
  std::vector<std::size_t> hidden{96};
  std::size_t classes = 10;
  bool residual = false;  // adds a same-shape conv block with a skip after the first block
};

Network make_cnn(const CnnSpec& spec);

}  // namespace xbar::nn
