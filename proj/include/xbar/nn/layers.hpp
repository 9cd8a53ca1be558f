#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xbar/common/rng.hpp"
#include "xbar/nn/tensor.hpp"

namespace xbar::nn {

enum class LayerKind { Linear, Conv2d, Relu, AvgPool, Flatten };

std::string to_string(LayerKind k);

/// One gradient buffer per parameter of a layer, in params() order.
using GradBuffers = std::span<AlignedVector>;

/// Shapes passed to and returned from a layer exclude the batch dimension;
/// tensors passed to forward/backward include it.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor forward(const Tensor& x) const = 0;
  /// Gradient w.r.t. the input. When `grads` is non-empty the parameter
  /// gradients are accumulated into it.
  virtual Tensor backward(const Tensor& x, const Tensor& grad_y, GradBuffers grads) const = 0;
  virtual std::vector<Tensor*> params() { return {}; }
  virtual std::vector<const Tensor*> params() const { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual nlohmann::json describe() const = 0;
  virtual void init(Rng&) {}

  /// True for layers that are a matrix product plus bias (mapped onto crossbars).
  bool affine() const { return kind() == LayerKind::Linear || kind() == LayerKind::Conv2d; }
};

class Linear final : public Layer {
 public:
  Linear(std::size_t in, std::size_t out);
  LayerKind kind() const override { return LayerKind::Linear; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_y, GradBuffers grads) const override;
  std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
  std::vector<const Tensor*> params() const override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }
  nlohmann::json describe() const override;
  void init(Rng& rng) override;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Tensor& weight() { return weight_; }  // [out, in]
  Tensor& bias() { return bias_; }      // [out]
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  std::size_t in_, out_;
  Tensor weight_, bias_;
};

struct ConvGeometry {
  std::size_t channels, height, width, kernel, stride, pad;
  std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  std::size_t patch_size() const { return channels * kernel * kernel; }
  std::size_t patches() const { return out_height() * out_width(); }
};

/// Unrolls one [C,H,W] sample into a (patches x C*k*k) matrix; columns are
/// ordered (channel, ky, kx), padding reads as zero.
RowMatrix im2col(const double* sample, const ConvGeometry& g);
/// Adds a (patches x C*k*k) matrix back into a [C,H,W] sample.
void col2im(const RowMatrix& cols, const ConvGeometry& g, double* sample);

class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride = 1,
         std::size_t pad = 0);
  LayerKind kind() const override { return LayerKind::Conv2d; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_y, GradBuffers grads) const override;
  std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
  std::vector<const Tensor*> params() const override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
  nlohmann::json describe() const override;
  void init(Rng& rng) override;

  ConvGeometry geometry(const Shape& in) const;
  std::size_t in_channels() const { return in_c_; }
  std::size_t out_channels() const { return out_c_; }
  std::size_t kernel() const { return k_; }
  std::size_t stride() const { return stride_; }
  std::size_t pad() const { return pad_; }
  Tensor& weight() { return weight_; }  // [out, in, k, k]
  Tensor& bias() { return bias_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  std::size_t in_c_, out_c_, k_, stride_, pad_;
  Tensor weight_, bias_;
};

class Relu final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::Relu; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_y, GradBuffers grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
  nlohmann::json describe() const override { return {{"type", "relu"}}; }
};

/// Non-overlapping average pooling with a square window (stride = window).
class AvgPool final : public Layer {
 public:
  explicit AvgPool(std::size_t window);
  LayerKind kind() const override { return LayerKind::AvgPool; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_y, GradBuffers grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<AvgPool>(*this); }
  nlohmann::json describe() const override { return {{"type", "avgpool"}, {"window", window_}}; }
  std::size_t window() const { return window_; }

 private:
  std::size_t window_;
};

class Flatten final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::Flatten; }
  Shape output_shape(const Shape& in) const override { return {shape_size(in)}; }
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_y, GradBuffers grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }
  nlohmann::json describe() const override { return {{"type", "flatten"}}; }
};

std::unique_ptr<Layer> layer_from_description(const nlohmann::json& j);

}  // namespace xbar::nn
