#include "xbar/nn/tensor.hpp"

#include <algorithm>

#include "xbar/common/error.hpp"

namespace xbar::nn {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, const std::vector<double>& data)
    : Tensor(std::move(shape), AlignedVector(data.begin(), data.end())) {}

Tensor::Tensor(Shape shape, AlignedVector data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_))
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
}

AlignedVector& Tensor::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0);
  return grad_;
}

void Tensor::zero_grad() { grad_.assign(data_.size(), 0.0); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), data_);
}

std::size_t Tensor::sample_size() const {
  return shape_.empty() || shape_[0] == 0 ? 0 : data_.size() / shape_[0];
}

Shape Tensor::sample_shape() const {
  return shape_.empty() ? Shape{} : Shape(shape_.begin() + 1, shape_.end());
}

Tensor Tensor::slice_batch(std::size_t begin, std::size_t count) const {
  if (shape_.empty() || begin + count > shape_[0]) throw ShapeError("batch slice out of range");
  Shape s = shape_;
  s[0] = count;
  const std::size_t per = sample_size();
  return Tensor(std::move(s), AlignedVector(data_.begin() + static_cast<long>(begin * per),
                                                  data_.begin() + static_cast<long>((begin + count) * per)));
}

Tensor Tensor::gather_batch(std::span<const std::size_t> indices) const {
  Shape s = shape_;
  s[0] = indices.size();
  const std::size_t per = sample_size();
  AlignedVector out(indices.size() * per);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= shape_[0]) throw ShapeError("batch index out of range");
    std::copy_n(data_.begin() + static_cast<long>(indices[k] * per), per,
                out.begin() + static_cast<long>(k * per));
  }
  return Tensor(std::move(s), std::move(out));
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  return {data_.data(), static_cast<long>(batch()), static_cast<long>(sample_size())};
}

Eigen::Map<RowMatrix> Tensor::matrix() {
  return {data_.data(), static_cast<long>(batch()), static_cast<long>(sample_size())};
}

Tensor concat_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_batch needs at least one tensor");
  Shape s = parts[0].shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.sample_shape() != parts[0].sample_shape()) throw ShapeError("concat_batch shape mismatch");
    total += p.batch();
  }
  s[0] = total;
  AlignedVector data;
  data.reserve(shape_size(s));
  for (const auto& p : parts) data.insert(data.end(), p.values().begin(), p.values().end());
  return Tensor(std::move(s), std::move(data));
}

}  // namespace xbar::nn
