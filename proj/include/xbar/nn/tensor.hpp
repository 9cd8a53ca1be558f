#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xbar/common/aligned.hpp"

namespace xbar::nn {

using Shape = std::vector<std::size_t>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t shape_size(const Shape& s);
std::string shape_string(const Shape& s);

/// Dense row-major tensor of doubles. Leading dimension is the batch wherever a
/// batch is involved. `grad` is either empty or the same length as the data.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, const std::vector<double>& data);
  Tensor(Shape shape, AlignedVector data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const AlignedVector& values() const { return data_; }
  std::vector<double> to_vector() const { return {data_.begin(), data_.end()}; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool has_grad() const { return !grad_.empty(); }
  AlignedVector& grad();  // allocates zeros on first use
  const AlignedVector& grad() const { return grad_; }
  void zero_grad();
  void drop_grad() { grad_.clear(); }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  /// Leading-dimension helpers.
  std::size_t batch() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t sample_size() const;
  Shape sample_shape() const;
  Tensor slice_batch(std::size_t begin, std::size_t count) const;
  Tensor gather_batch(std::span<const std::size_t> indices) const;

  /// View as a (batch x sample_size) row-major matrix.
  Eigen::Map<const RowMatrix> matrix() const;
  Eigen::Map<RowMatrix> matrix();

  bool operator==(const Tensor& other) const { return shape_ == other.shape_ && data_ == other.data_; }

 private:
  Shape shape_;
  AlignedVector data_;
  AlignedVector grad_;
};

/// Concatenate along the batch dimension; all parts share the sample shape.
Tensor concat_batch(std::span<const Tensor> parts);

}  // namespace xbar::nn
