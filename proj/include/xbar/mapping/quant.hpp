#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace xbar::mapping {

struct QuantConfig {
  int input_bits = 8;
  int weight_bits = 8;
  int stream_bits = 1;
  int slice_bits = 2;

  /// Checks divisibility and that a slice digit fits the device's level count.
  void validate(int device_levels) const;
  int streams() const { return input_bits / stream_bits; }
  int slices() const { return weight_bits / slice_bits; }
  int max_stream_digit() const { return (1 << stream_bits) - 1; }
  int max_slice_digit() const { return (1 << slice_bits) - 1; }
  int max_weight() const { return (1 << (weight_bits - 1)) - 1; }
  int max_input() const { return (1 << input_bits) - 1; }
};

/// Symmetric per-tensor quantization: w ~= values * scale with
/// |values| <= 2^(weight_bits-1) - 1. An all-zero tensor gets scale 1.
struct QuantizedTensor {
  std::vector<std::int32_t> values;
  double scale = 1.0;
};

QuantizedTensor quantize_layer(std::span<const double> weights, const QuantConfig& qc);
std::vector<double> dequantize(const QuantizedTensor& q);

/// Base-2^slice_bits digits of |w|, split by sign. Slice s (least significant
/// first) has place value 2^(s*slice_bits); pos/neg are row-major digit
/// matrices with the same layout as the input integers.
struct SlicedDigits {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<std::uint8_t>> pos;  // [slice][rows*cols]
  std::vector<std::vector<std::uint8_t>> neg;
  std::int64_t place_value(int slice, const QuantConfig& qc) const {
    return std::int64_t{1} << (slice * qc.slice_bits);
  }
};

SlicedDigits slice_weights(std::span<const std::int32_t> int_weights, std::size_t rows, std::size_t cols,
                           const QuantConfig& qc);
/// sum_s place(s) * (pos[s] - neg[s]) per entry.
std::vector<std::int32_t> unslice(const SlicedDigits& d, const QuantConfig& qc);

/// Unsigned inputs in [0, 2^input_bits) split into input_bits/stream_bits
/// digit vectors, least significant first.
std::vector<std::vector<std::uint8_t>> stream_inputs(std::span<const std::int32_t> int_inputs, const QuantConfig& qc);

/// Dynamic unsigned input scale: max|x| / (2^input_bits - 1), or 1 for all zeros.
double input_scale(std::span<const double> x, const QuantConfig& qc);
std::int32_t quantize_input(double x, double scale, const QuantConfig& qc);

}  // namespace xbar::mapping
