#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "xbar/nn/tensor.hpp"

namespace xbar::nn {

/// Images [N,C,H,W] with values in [0,1] plus integer class labels.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  int num_classes = 10;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  Dataset slice(std::size_t begin, std::size_t count) const;
  Dataset subset(std::span<const std::size_t> indices) const;
  void validate() const;
};

/// IDX (MNIST-style) files: unsigned-byte images scaled by 1/255, byte labels.
Tensor load_idx_images(const std::filesystem::path& path);
std::vector<int> load_idx_labels(const std::filesystem::path& path);
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels);
void save_idx_images(const std::filesystem::path& path, const Tensor& images);
void save_idx_labels(const std::filesystem::path& path, std::span<const int> labels);

/// Seeded seven-segment digit renderer: random glyph size, position, stroke
/// width and intensity plus clipped Gaussian pixel noise.
struct SyntheticDigits {
  std::size_t size = 16;
  double noise = 0.15;
  Dataset generate(std::size_t n, std::uint64_t seed) const;
};

}  // namespace xbar::nn
