#include "xbar/nn/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "xbar/common/container.hpp"
#include "xbar/common/error.hpp"
#include "xbar/common/rng.hpp"

namespace xbar::nn {

Dataset Dataset::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > size()) throw ShapeError("dataset slice out of range");
  return {images.slice_batch(begin, count),
          std::vector<int>(labels.begin() + static_cast<long>(begin),
                           labels.begin() + static_cast<long>(begin + count)),
          num_classes};
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset d{images.gather_batch(indices), {}, num_classes};
  for (auto i : indices) d.labels.push_back(labels.at(i));
  return d;
}

void Dataset::validate() const {
  if (images.rank() != 4) throw ShapeError("dataset images must be [N,C,H,W]");
  if (images.batch() != labels.size()) throw ShapeError("dataset image/label count mismatch");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw RangeError("dataset label " + std::to_string(y) + " out of range");
}

// ---- IDX ------------------------------------------------------------------

namespace {

std::uint32_t be32(const std::string& b, std::size_t off) {
  if (off + 4 > b.size()) throw FormatError("truncated IDX header");
  return (std::uint32_t(std::uint8_t(b[off])) << 24) | (std::uint32_t(std::uint8_t(b[off + 1])) << 16) |
         (std::uint32_t(std::uint8_t(b[off + 2])) << 8) | std::uint32_t(std::uint8_t(b[off + 3]));
}

void put32(std::string& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<char>((v >> s) & 0xff));
}

// Returns dims; payload starts after the header.
std::vector<std::uint32_t> idx_header(const std::string& b, std::size_t& payload) {
  if (b.size() < 4 || b[0] != 0 || b[1] != 0 || std::uint8_t(b[2]) != 0x08)
    throw FormatError("not an unsigned-byte IDX file");
  const std::size_t rank = std::uint8_t(b[3]);
  std::vector<std::uint32_t> dims;
  std::size_t total = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    dims.push_back(be32(b, 4 + 4 * i));
    total *= dims.back();
  }
  payload = 4 + 4 * rank;
  if (b.size() != payload + total) throw FormatError("IDX payload length does not match header");
  return dims;
}

}  // namespace

Tensor load_idx_images(const std::filesystem::path& path) {
  const std::string b = read_file(path);
  std::size_t off = 0;
  const auto dims = idx_header(b, off);
  Shape shape;
  if (dims.size() == 3) shape = {dims[0], 1, dims[1], dims[2]};
  else if (dims.size() == 4) shape = {dims[0], dims[1], dims[2], dims[3]};
  else throw FormatError("IDX images must have rank 3 or 4");
  std::vector<double> data(b.size() - off);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::uint8_t(b[off + i]) / 255.0;
  return Tensor(std::move(shape), std::move(data));
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  const std::string b = read_file(path);
  std::size_t off = 0;
  const auto dims = idx_header(b, off);
  if (dims.size() != 1) throw FormatError("IDX labels must have rank 1");
  std::vector<int> out(dims[0]);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::uint8_t(b[off + i]);
  return out;
}

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels) {
  Dataset d{load_idx_images(images), load_idx_labels(labels), 10};
  const int top = d.labels.empty() ? 0 : *std::max_element(d.labels.begin(), d.labels.end());
  d.num_classes = std::max(10, top + 1);
  d.validate();
  return d;
}

void save_idx_images(const std::filesystem::path& path, const Tensor& images) {
  if (images.rank() != 4) throw ShapeError("IDX export needs [N,C,H,W] images");
  std::string b{0, 0, 0x08, 4};
  for (auto d : images.shape()) put32(b, static_cast<std::uint32_t>(d));
  for (double v : images.data())
    b.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  write_file_atomic(path, b);
}

void save_idx_labels(const std::filesystem::path& path, std::span<const int> labels) {
  std::string b{0, 0, 0x08, 1};
  put32(b, static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) {
    if (y < 0 || y > 255) throw RangeError("IDX label out of byte range");
    b.push_back(static_cast<char>(y));
  }
  write_file_atomic(path, b);
}

// ---- synthetic digits ---------------------------------------------------

namespace {

// Segments a..g of a seven-segment glyph, bit i = segment 'a'+i.
constexpr std::array<unsigned, 10> kGlyph = {
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
    0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111,
};

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {  // inclusive
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace

Dataset SyntheticDigits::generate(std::size_t n, std::uint64_t seed) const {
  if (size < 12) throw RangeError("synthetic digits need an image size of at least 12");
  const std::size_t S = size;
  Dataset d{Tensor({n, 1, S, S}), std::vector<int>(n), 10};
  Rng rng = make_rng(seed, 0);
  std::normal_distribution<double> gauss(0.0, noise);
  std::uniform_real_distribution<double> level(0.6, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int digit = static_cast<int>(uniform_index(rng, 0, 9));
    d.labels[i] = digit;
    const std::size_t h = uniform_index(rng, S * 9 / 16, S * 11 / 16);
    const std::size_t w = uniform_index(rng, S * 5 / 16, S * 7 / 16);
    const std::size_t t = uniform_index(rng, 1, 2);
    const std::size_t y0 = uniform_index(rng, 1, S - h - 1);
    const std::size_t x0 = uniform_index(rng, 1, S - w - 1);
    const std::size_t m = h / 2, g0 = y0 + m - t / 2;
    // {y_begin, y_end, x_begin, x_end} for segments a..g
    const std::size_t seg[7][4] = {
        {y0, y0 + t, x0, x0 + w},                  // a
        {y0, y0 + m, x0 + w - t, x0 + w},          // b
        {y0 + m, y0 + h, x0 + w - t, x0 + w},      // c
        {y0 + h - t, y0 + h, x0, x0 + w},          // d
        {y0 + m, y0 + h, x0, x0 + t},              // e
        {y0, y0 + m, x0, x0 + t},                  // f
        {g0, g0 + t, x0, x0 + w},                  // g
    };
    double* img = d.images.ptr() + i * S * S;
    for (int s = 0; s < 7; ++s)
      if (kGlyph[static_cast<std::size_t>(digit)] >> s & 1u)
        for (std::size_t y = seg[s][0]; y < seg[s][1]; ++y)
          for (std::size_t x = seg[s][2]; x < seg[s][3]; ++x) img[y * S + x] = 1.0;
    const double a = level(rng);
    for (std::size_t p = 0; p < S * S; ++p) img[p] = std::clamp(img[p] * a + gauss(rng), 0.0, 1.0);
  }
  return d;
}

}  // namespace xbar::nn
