#include "xbar/mapping/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xbar/common/error.hpp"

namespace xbar::mapping {

void QuantConfig::validate(int device_levels) const {
  if (input_bits < 1 || weight_bits < 2 || stream_bits < 1 || slice_bits < 1)
    throw ConfigError("quantization bit widths must be positive (weight_bits >= 2)");
  if (input_bits > 16 || weight_bits > 16) throw ConfigError("quantization supports at most 16 bits");
  if (input_bits % stream_bits != 0) throw ConfigError("input_bits must be divisible by stream_bits");
  if (weight_bits % slice_bits != 0) throw ConfigError("weight_bits must be divisible by slice_bits");
  if ((1 << slice_bits) > device_levels)
    throw ConfigError("2^slice_bits = " + std::to_string(1 << slice_bits) + " exceeds the device's " +
                      std::to_string(device_levels) + " levels");
  if ((device_levels - 1) % max_slice_digit() != 0)
    throw ConfigError("device level count minus one must be a multiple of the largest slice digit");
}

QuantizedTensor quantize_layer(std::span<const double> weights, const QuantConfig& qc) {
  double m = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w)) throw RangeError("cannot quantize a non-finite weight");
    m = std::max(m, std::abs(w));
  }
  const int qmax = qc.max_weight();
  QuantizedTensor q;
  q.scale = m > 0.0 ? m / qmax : 1.0;
  q.values.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const long r = std::lround(weights[i] / q.scale);
    q.values[i] = static_cast<std::int32_t>(std::clamp<long>(r, -qmax, qmax));
  }
  return q;
}

std::vector<double> dequantize(const QuantizedTensor& q) {
  std::vector<double> out(q.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = q.values[i] * q.scale;
  return out;
}

SlicedDigits slice_weights(std::span<const std::int32_t> int_weights, std::size_t rows, std::size_t cols,
                           const QuantConfig& qc) {
  if (int_weights.size() != rows * cols) throw ShapeError("weight integers do not match rows x cols");
  const int limit = qc.max_weight();
  const int slices = qc.slices();
  const unsigned mask = static_cast<unsigned>(qc.max_slice_digit());
  SlicedDigits d;
  d.rows = rows;
  d.cols = cols;
  d.pos.assign(static_cast<std::size_t>(slices), std::vector<std::uint8_t>(rows * cols, 0));
  d.neg = d.pos;
  for (std::size_t k = 0; k < int_weights.size(); ++k) {
    const std::int32_t w = int_weights[k];
    if (w > limit || w < -limit)
      throw RangeError("weight integer " + std::to_string(w) + " outside +-" + std::to_string(limit));
    auto& side = w >= 0 ? d.pos : d.neg;
    unsigned mag = static_cast<unsigned>(w >= 0 ? w : -w);
    for (int s = 0; s < slices; ++s) {
      side[static_cast<std::size_t>(s)][k] = static_cast<std::uint8_t>(mag & mask);
      mag >>= qc.slice_bits;
    }
  }
  return d;
}

std::vector<std::int32_t> unslice(const SlicedDigits& d, const QuantConfig& qc) {
  std::vector<std::int32_t> out(d.rows * d.cols, 0);
  for (std::size_t s = 0; s < d.pos.size(); ++s) {
    const auto place = static_cast<std::int32_t>(d.place_value(static_cast<int>(s), qc));
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += place * (d.pos[s][k] - d.neg[s][k]);
  }
  return out;
}

std::vector<std::vector<std::uint8_t>> stream_inputs(std::span<const std::int32_t> int_inputs,
                                                     const QuantConfig& qc) {
  const int top = qc.max_input();
  const unsigned mask = static_cast<unsigned>(qc.max_stream_digit());
  std::vector<std::vector<std::uint8_t>> out(static_cast<std::size_t>(qc.streams()),
                                             std::vector<std::uint8_t>(int_inputs.size(), 0));
  for (std::size_t k = 0; k < int_inputs.size(); ++k) {
    const std::int32_t x = int_inputs[k];
    if (x < 0 || x > top) throw RangeError("input integer " + std::to_string(x) + " outside [0," + std::to_string(top) + "]");
    unsigned u = static_cast<unsigned>(x);
    for (auto& stream : out) {
      stream[k] = static_cast<std::uint8_t>(u & mask);
      u >>= qc.stream_bits;
    }
  }
  return out;
}

double input_scale(std::span<const double> x, const QuantConfig& qc) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m > 0.0 ? m / qc.max_input() : 1.0;
}

std::int32_t quantize_input(double x, double scale, const QuantConfig& qc) {
  return static_cast<std::int32_t>(std::clamp<long>(std::lround(x / scale), 0, qc.max_input()));
}

}  // namespace xbar::mapping
