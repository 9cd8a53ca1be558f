#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "doctest.h"
#include "xbar/circuit/model_file.hpp"
#include "xbar/common/error.hpp"
#include "xbar/common/rng.hpp"
#include "xbar/mapping/analog.hpp"
#include "xbar/mapping/report.hpp"
#include "xbar/nn/layers.hpp"
#include "xbar/nn/network.hpp"

using namespace xbar;
using namespace xbar::mapping;

namespace {

// Exact integer product in 64-bit arithmetic, independent of the mapping code.
std::vector<std::int64_t> int_mvm(const std::vector<std::int32_t>& x, std::size_t p, std::size_t k,
                                  const std::vector<std::int32_t>& w, std::size_t n) {
  std::vector<std::int64_t> out(p * n, 0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      std::int64_t s = 0;
      for (std::size_t q = 0; q < k; ++q) s += std::int64_t{x[i * k + q]} * w[q * n + j];
      out[i * n + j] = s;
    }
  return out;
}

circuit::CrossbarModel zero_parasitic(std::size_t r, std::size_t c) {
  circuit::CrossbarModel m;
  m.name = "ideal-circuit";
  m.geometry = {r, c, 0.0, 0.0, 0.0};
  return m;
}

circuit::CrossbarModel calibrated(const std::string& name, double r_wire) {
  auto m = circuit::preset(name);
  m.geometry.r_wire = r_wire;
  return m;
}

}  // namespace

TEST_CASE("quantize_layer: zero tensor, symmetric range, half-step bound") {
  QuantConfig qc;
  auto z = quantize_layer(std::vector<double>(5, 0.0), qc);
  CHECK(z.scale == 1.0);
  for (auto v : z.values) CHECK(v == 0);

  auto pm = quantize_layer(std::vector<double>{-1.0, 1.0, 1.0, -1.0}, qc);
  CHECK(pm.values == std::vector<std::int32_t>{-127, 127, 127, -127});

  Rng rng = make_rng(5);
  std::normal_distribution<double> n(0.0, 0.3);
  std::vector<double> w(500);
  for (auto& v : w) v = n(rng);
  auto q = quantize_layer(w, qc);
  const auto back = dequantize(q);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(back[i] - w[i]) <= q.scale / 2 + 1e-15);

  CHECK_THROWS_AS(quantize_layer(std::vector<double>{NAN}, qc), RangeError);
}

TEST_CASE("slice_weights: base-4 digits with sign split") {
  QuantConfig qc;
  auto d = slice_weights(std::vector<std::int32_t>{13, -13}, 1, 2, qc);
  REQUIRE(d.pos.size() == 4);
  // 13 = 1 * 4^0 + 3 * 4^1, least significant slice first
  CHECK(d.pos[0][0] == 1);
  CHECK(d.pos[1][0] == 3);
  CHECK(d.pos[2][0] == 0);
  CHECK(d.neg[0][0] == 0);
  CHECK(d.neg[0][1] == 1);
  CHECK(d.neg[1][1] == 3);
  CHECK(d.pos[0][1] == 0);
  CHECK(d.pos[1][1] == 0);
  CHECK_THROWS_AS(slice_weights(std::vector<std::int32_t>{128}, 1, 1, qc), RangeError);

  Rng rng = make_rng(11);
  std::uniform_int_distribution<std::int32_t> u(-127, 127);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::int32_t> w(6 * 7);
    for (auto& v : w) v = u(rng);
    const auto s = slice_weights(w, 6, 7, qc);
    for (const auto& sl : s.pos)
      for (auto dgt : sl) CHECK(dgt <= 3);
    REQUIRE(unslice(s, qc) == w);
  }
}

TEST_CASE("stream_inputs: LSB-first bit planes") {
  QuantConfig qc{4, 8, 1, 2};
  auto s = stream_inputs(std::vector<std::int32_t>{11, 0}, qc);
  REQUIRE(s.size() == 4);
  CHECK(s[0][0] == 1);
  CHECK(s[1][0] == 1);
  CHECK(s[2][0] == 0);
  CHECK(s[3][0] == 1);
  for (const auto& plane : s) CHECK(plane[1] == 0);

  QuantConfig q8;
  Rng rng = make_rng(3);
  std::uniform_int_distribution<std::int32_t> u(0, 255);
  std::vector<std::int32_t> x(1000);
  for (auto& v : x) v = u(rng);
  const auto planes = stream_inputs(x, q8);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::int32_t r = 0;
    for (std::size_t t = 0; t < planes.size(); ++t) r += planes[t][i] << t;
    CHECK(r == x[i]);
  }
  CHECK_THROWS_AS(stream_inputs(std::vector<std::int32_t>{256}, q8), RangeError);
}

TEST_CASE("map_matrix_to_tiles: grid shape, endpoints, read-back") {
  QuantConfig qc;
  circuit::DeviceModel dev;
  CHECK(digit_conductance(0, dev, qc) == 1.0 / dev.r_off);
  CHECK(digit_conductance(3, dev, qc) == doctest::Approx(1.0 / dev.r_on).epsilon(1e-15));
  CHECK_THROWS_AS(digit_conductance(4, dev, qc), RangeError);

  Rng rng = make_rng(8);
  std::uniform_int_distribution<std::int32_t> u(-127, 127);
  std::vector<std::int32_t> w(100 * 100);
  for (auto& v : w) v = u(rng);
  const auto digits = slice_weights(w, 100, 100, qc);
  const auto grid = map_matrix_to_tiles(digits, 64, 64, dev, qc);
  CHECK(grid.grid_rows == 2);
  CHECK(grid.grid_cols == 2);
  CHECK(grid.crossbar_count() == 2 * 2 * 4 * 2);
  // Padding of the last tile is digit 0.
  const auto& edge = grid.at(1, 1).pos[0];
  CHECK(edge(63, 63) == 1.0 / dev.r_off);
  const auto back = read_back(grid, dev, qc);
  CHECK(unslice(back, qc) == w);
}

TEST_CASE("integer_mvm: 200 random layers equal the exact integer product (literal path)") {
  QuantConfig qc;
  auto ideal = std::make_shared<IdealDigitalBackend>();
  Rng rng = make_rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 90);
  std::uniform_int_distribution<std::size_t> tdim(8, 40);
  std::uniform_int_distribution<std::int32_t> wi(-127, 127), xi(0, 255);
  std::size_t mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = dim(rng), n = dim(rng), p = 1 + dim(rng) % 5;
    nn::Linear lin(k, n);
    // Weights chosen so quantization reproduces integers exactly: max |w| = 127.
    std::vector<std::int32_t> wint(k * n);
    for (auto& v : wint) v = wi(rng);
    wint[0] = 127;
    for (std::size_t o = 0; o < n; ++o)
      for (std::size_t i = 0; i < k; ++i) lin.weight()[o * k + i] = wint[i * n + o] / 127.0;
    const auto mapped = map_layer(lin, 0, {k}, qc, tdim(rng), tdim(rng), ideal->device());
    REQUIRE(mapped.weights.values == wint);
    AnalogLayer layer(mapped, *ideal, qc, ExecOptions{false});
    CHECK_FALSE(layer.folded());
    std::vector<std::int32_t> x(p * k);
    RowMatrix xm(static_cast<long>(p), static_cast<long>(k));
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = xi(rng);
      xm(static_cast<long>(i / k), static_cast<long>(i % k)) = x[i];
    }
    const auto got = layer.integer_mvm(xm);
    const auto want = int_mvm(x, p, k, wint, n);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (got(static_cast<long>(i), static_cast<long>(j)) != static_cast<double>(want[i * n + j])) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("folded execution equals the literal path") {
  QuantConfig qc;
  const auto model = calibrated("32x32_100k", 18.77);
  circuit::CrossbarModel m = model;
  CircuitBackend circuit_backend(m);
  Rng rng = make_rng(77);
  nn::Linear lin(50, 20);
  lin.init(rng);
  const auto mapped = map_layer(lin, 0, {50}, qc, 32, 32, circuit_backend.device());
  AnalogLayer folded(mapped, circuit_backend, qc, ExecOptions{true});
  AnalogLayer literal(mapped, circuit_backend, qc, ExecOptions{false});
  REQUIRE(folded.folded());
  RowMatrix x(3, 50);
  std::uniform_int_distribution<int> u(0, 255);
  for (long i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  const auto a = folded.integer_mvm(x), b = literal.integer_mvm(x);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9 * b.cwiseAbs().maxCoeff());
}

TEST_CASE("analog forward: ideal backend within quantization error, zero-parasitic circuit equals ideal") {
  QuantConfig qc;
  nn::CnnSpec spec;
  auto net = nn::make_cnn(spec);
  net.init(4);
  Rng rng = make_rng(9);
  nn::Tensor x({4, 1, 16, 16});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : x.data()) v = u(rng);

  auto ideal = std::make_shared<IdealDigitalBackend>();
  AnalogNetwork on_ideal(net, ideal, qc, {32, 32});
  const auto digital = net.forward(x);
  const auto analog = on_ideal.logits(x);
  double scale = 0.0, err = 0.0;
  for (std::size_t i = 0; i < digital.size(); ++i) {
    scale = std::max(scale, std::abs(digital[i]));
    err = std::max(err, std::abs(digital[i] - analog[i]));
  }
  CHECK(err <= 0.05 * scale);

  auto zero = std::make_shared<CircuitBackend>(zero_parasitic(32, 32));
  AnalogNetwork on_zero(net, zero, qc, {32, 32});
  const auto z = on_zero.logits(x);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(z[i] - analog[i]) <= 1e-9 * std::max(1.0, std::abs(analog[i])));

  // Determinism on a zero image.
  nn::Tensor blank({1, 1, 16, 16});
  CHECK(on_ideal.logits(blank) == on_ideal.logits(blank));
}

TEST_CASE("sign split: all-zero rows and negative inputs") {
  QuantConfig qc;
  auto ideal = std::make_shared<IdealDigitalBackend>();
  Rng rng = make_rng(12);
  nn::Linear lin(10, 4);
  lin.init(rng);
  for (auto& b : lin.bias().data()) b = 0.0;
  const auto mapped = map_layer(lin, 0, {10}, qc, 16, 16, ideal->device());
  AnalogLayer layer(mapped, *ideal, qc);
  nn::Tensor zeros({2, 10});
  const auto y0 = layer.forward(zeros);
  for (double v : y0.data()) CHECK(v == 0.0);

  // f(-x) == -f(x) exactly: the negative pass mirrors the positive one.
  nn::Tensor x({1, 10});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : x.data()) v = u(rng);
  nn::Tensor nx = x;
  for (auto& v : nx.data()) v = -v;
  const auto a = layer.forward(x), b = layer.forward(nx);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == -b[i]);
}

TEST_CASE("layer deviation grows with the non-ideality factor") {
  QuantConfig qc;
  Rng rng = make_rng(21);
  nn::Linear lin(64, 64);
  lin.init(rng);
  nn::Tensor x({8, 64});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : x.data()) v = u(rng);
  auto ideal = std::make_shared<IdealDigitalBackend>();
  const auto ref = AnalogLayer(map_layer(lin, 0, {64}, qc, 64, 64, ideal->device()), *ideal, qc).forward(x);
  auto deviation = [&](const circuit::CrossbarModel& m) {
    CircuitBackend be(m);
    AnalogLayer layer(map_layer(lin, 0, {64}, qc, m.geometry.rows, m.geometry.cols, be.device()), be, qc);
    const auto y = layer.forward(x);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      num += std::abs(y[i] - ref[i]);
      den += std::abs(ref[i]);
    }
    return num / den;
  };
  const double d07 = deviation(calibrated("64x64_300k", 3.38));
  const double d14 = deviation(calibrated("32x32_100k", 18.77));
  const double d26 = deviation(calibrated("64x64_100k", 12.23));
  CHECK(d07 > 0.0);
  CHECK(d07 < d14);
  CHECK(d14 < d26);
}

TEST_CASE("backend/tile mismatch and mapping report") {
  QuantConfig qc;
  CircuitBackend be(calibrated("32x32_100k", 18.77));
  nn::Linear lin(40, 8);
  const auto wrong = map_layer(lin, 0, {40}, qc, 64, 64, be.device());
  CHECK_THROWS_AS(AnalogLayer(wrong, be, qc), ShapeError);

  auto net = nn::make_cnn({});
  net.init(1);
  AnalogNetwork an(net, std::make_shared<IdealDigitalBackend>(), qc, {64, 64});
  std::vector<const MappedLayer*> layers = an.mapped_layers();
  const auto rep = mapping_report(layers, qc);
  CHECK(rep.is_object());
  CHECK(layers.size() == 4);
}
