#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "doctest.h"
#include "xbar/common/error.hpp"
#include "xbar/common/rng.hpp"
#include "xbar/nn/checkpoint.hpp"
#include "xbar/nn/dataset.hpp"
#include "xbar/nn/loss.hpp"
#include "xbar/nn/network.hpp"
#include "xbar/nn/train.hpp"

using namespace xbar;
using namespace xbar::nn;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(s));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Randomizes biases too so that every gradient path is exercised.
void randomize(Network& net, std::uint64_t seed, double scale = 0.5) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto* p : net.params())
    for (auto& v : p->data()) v = u(rng);
}

double sum_loss(const Network& net, const Tensor& x, const std::vector<int>& y) {
  double s = 0;
  for (double l : cross_entropy_per_sample(net.forward(x), y)) s += l;
  return s;
}

// Central differences, h = 1e-5; compares with the reverse-mode input gradient.
double max_fd_error(const Network& net, const Tensor& x, const std::vector<int>& y) {
  const auto g = loss_and_input_grad(net, x, y);
  double worst = 0;
  double gmax = 0;
  for (double v : g.grad_x.data()) gmax = std::max(gmax, std::abs(v));
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp[i] += 1e-5;
    xm[i] -= 1e-5;
    const double fd = (sum_loss(net, xp, y) - sum_loss(net, xm, y)) / 2e-5;
    worst = std::max(worst, std::abs(fd - g.grad_x[i]) / std::max(std::abs(fd), 1e-3 * gmax));
  }
  return worst;
}

double max_fd_param_error(Network& net, const Tensor& x, const std::vector<int>& y) {
  const Trace tr = net.forward_trace(x);
  const auto ce = softmax_cross_entropy(tr.output(), y);
  ParamGrads grads = net.zero_param_grads();
  net.backward(tr, ce.grad, &grads);
  auto params = net.params();
  double worst = 0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    double gmax = 0;
    for (double v : grads[p]) gmax = std::max(gmax, std::abs(v));
    for (std::size_t i = 0; i < params[p]->size(); ++i) {
      double& w = (*params[p])[i];
      const double w0 = w;
      w = w0 + 1e-5;
      const double lp = softmax_cross_entropy(net.forward(x), y).loss;
      w = w0 - 1e-5;
      const double lm = softmax_cross_entropy(net.forward(x), y).loss;
      w = w0;
      const double fd = (lp - lm) / 2e-5;
      worst = std::max(worst, std::abs(fd - grads[p][i]) / std::max(std::abs(fd), 1e-3 * gmax));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  Tensor t({2, 3}, 1.0);
  CHECK(t.grad().size() == 6);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  CHECK(t.slice_batch(1, 1).shape() == Shape{1, 3});
}

TEST_CASE("zero weights give zero logits and ln(K) loss") {
  Network net = make_cnn({});
  for (auto* p : net.params())
    for (auto& v : p->data()) v = 0.0;
  Rng rng = make_rng(1);
  const Tensor x = random_tensor({3, 1, 16, 16}, rng, 0, 1);
  const Tensor z = net.forward(x);
  for (double v : z.data()) CHECK(v == 0.0);
  std::vector<int> y{0, 4, 9};
  CHECK(softmax_cross_entropy(z, y).loss == doctest::Approx(std::log(10.0)).epsilon(1e-14));
  std::vector<int> bad{0, 4, 10};
  CHECK_THROWS_AS(loss_and_input_grad(net, x, bad), RangeError);
  CHECK_THROWS_AS(net.forward(Tensor({1, 1, 8, 8})), ShapeError);
}

TEST_CASE("linear layer and linear softmax gradient closed form") {
  Network net({4});
  net.emplace<Linear>(4, 3);
  randomize(net, 2);
  auto& lin = dynamic_cast<Linear&>(net.layer(0));
  Rng rng = make_rng(3);
  const Tensor x = random_tensor({1, 4}, rng);
  const Tensor z = net.forward(x);
  for (std::size_t o = 0; o < 3; ++o) {
    double s = lin.bias()[o];
    for (std::size_t i = 0; i < 4; ++i) s += lin.weight()[o * 4 + i] * x[i];
    CHECK(z[o] == doctest::Approx(s).epsilon(1e-14));
  }
  std::vector<int> y{1};
  const auto g = loss_and_input_grad(net, x, y);
  const Tensor p = softmax(z);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0;
    for (std::size_t o = 0; o < 3; ++o) s += lin.weight()[o * 4 + i] * (p[o] - (o == 1 ? 1.0 : 0.0));
    CHECK(g.grad_x[i] == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("forward matches a naive re-implementation") {
  Network net({2, 6, 6});
  net.emplace<Conv2d>(2, 3, 3, 1, 1).emplace<Relu>().emplace<AvgPool>(2).emplace<Flatten>().emplace<Linear>(27, 4);
  randomize(net, 4);
  Rng rng = make_rng(5);
  const Tensor x = random_tensor({2, 2, 6, 6}, rng);
  const Tensor z = net.forward(x);
  const auto& conv = dynamic_cast<const Conv2d&>(net.layer(0));
  const auto& lin = dynamic_cast<const Linear&>(net.layer(4));
  for (std::size_t n = 0; n < 2; ++n) {
    double act[3][6][6];
    for (int o = 0; o < 3; ++o)
      for (int yy = 0; yy < 6; ++yy)
        for (int xx = 0; xx < 6; ++xx) {
          double s = conv.bias()[o];
          for (int c = 0; c < 2; ++c)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = yy + ky - 1, ix = xx + kx - 1;
                if (iy < 0 || ix < 0 || iy >= 6 || ix >= 6) continue;
                s += conv.weight()[((o * 2 + c) * 3 + ky) * 3 + kx] * x[((n * 2 + c) * 6 + iy) * 6 + ix];
              }
          act[o][yy][xx] = s > 0 ? s : 0;
        }
    double flat[27];
    for (int o = 0; o < 3; ++o)
      for (int py = 0; py < 3; ++py)
        for (int px = 0; px < 3; ++px)
          flat[(o * 3 + py) * 3 + px] = (act[o][2 * py][2 * px] + act[o][2 * py][2 * px + 1] +
                                         act[o][2 * py + 1][2 * px] + act[o][2 * py + 1][2 * px + 1]) / 4;
    for (int k = 0; k < 4; ++k) {
      double s = lin.bias()[k];
      for (int i = 0; i < 27; ++i) s += lin.weight()[k * 27 + i] * flat[i];
      CHECK(std::abs(z[n * 4 + k] - s) <= 1e-12 * std::max(1.0, std::abs(s)));
    }
  }
}

TEST_CASE("input gradients match central differences on a 2-conv net") {
  Network net = make_cnn({{1, 8, 8}, {3, 4}, {6}, 5, false});
  randomize(net, 6);
  Rng rng = make_rng(7);
  const Tensor x = random_tensor({2, 1, 8, 8}, rng, 0, 1);
  std::vector<int> y{1, 3};
  CHECK(max_fd_error(net, x, y) <= 1e-4);
}

TEST_CASE("gradients match central differences for every layer type") {
  Rng rng = make_rng(8);
  SUBCASE("linear + relu") {
    Network net({5});
    net.emplace<Linear>(5, 4).emplace<Relu>().emplace<Linear>(4, 3);
    randomize(net, 9);
    const Tensor x = random_tensor({3, 5}, rng);
    std::vector<int> y{0, 1, 2};
    CHECK(max_fd_error(net, x, y) <= 1e-4);
    CHECK(max_fd_param_error(net, x, y) <= 1e-4);
  }
  SUBCASE("strided conv without padding, pool, flatten") {
    Network net({2, 7, 7});
    net.emplace<Conv2d>(2, 2, 3, 2, 0).emplace<AvgPool>(3).emplace<Flatten>().emplace<Linear>(2, 3);
    randomize(net, 10);
    const Tensor x = random_tensor({2, 2, 7, 7}, rng);
    std::vector<int> y{2, 0};
    CHECK(max_fd_error(net, x, y) <= 1e-4);
    CHECK(max_fd_param_error(net, x, y) <= 1e-4);
  }
  SUBCASE("residual skip") {
    Network net = make_cnn({{1, 8, 8}, {2, 3}, {4}, 3, true});
    REQUIRE(net.skips().size() == 1);
    randomize(net, 11);
    const Tensor x = random_tensor({2, 1, 8, 8}, rng, 0, 1);
    std::vector<int> y{2, 1};
    CHECK(max_fd_error(net, x, y) <= 1e-4);
    CHECK(max_fd_param_error(net, x, y) <= 1e-4);
  }
}

TEST_CASE("softmax cross-entropy is stable for large logits") {
  Tensor z({2, 3}, std::vector<double>{50, -50, 0, -50, -50, 50});
  std::vector<int> y{1, 2};
  const auto ce = softmax_cross_entropy(z, y);
  CHECK(std::isfinite(ce.loss));
  for (double g : ce.grad.data()) CHECK(std::isfinite(g));
  CHECK(ce.loss == doctest::Approx(50.0).epsilon(1e-9));
}

TEST_CASE("training: zero epochs, determinism, NaN detection") {
  SyntheticDigits gen;
  const Dataset train = gen.generate(256, 1);
  Network net = make_cnn({});
  net.init(3);
  const Network before = net;
  TrainOptions opt;
  opt.epochs = 0;
  train_classifier(net, train, nullptr, opt);
  for (std::size_t i = 0; i < net.params().size(); ++i) CHECK(*net.params()[i] == *before.params()[i]);

  opt.epochs = 2;
  Network a = before, b = before;
  const auto ha = train_classifier(a, train, &train, opt);
  const auto hb = train_classifier(b, train, &train, opt);
  CHECK(ha.loss == hb.loss);
  CHECK(ha.test_acc == hb.test_acc);
  CHECK(ha.loss.back() < ha.loss.front());

  Network c = before;
  Dataset poisoned = train;
  poisoned.images[5] = std::nan("");
  try {
    train_classifier(c, poisoned, nullptr, opt);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(e.epoch() >= 0);
  }
}

TEST_CASE("memorizing a tiny set reaches accuracy 1 and empty sets are rejected") {
  SyntheticDigits gen;
  const Dataset tiny = gen.generate(20, 2);
  Network net = make_cnn({});
  net.init(4);
  TrainOptions opt;
  opt.epochs = 150;
  opt.lr = 0.1;
  opt.batch = 20;
  train_classifier(net, tiny, nullptr, opt);
  CHECK(evaluate_accuracy(DigitalExecutor(net), tiny) == 1.0);
  Dataset empty{Tensor({0, 1, 16, 16}), {}, 10};
  CHECK_THROWS_AS(evaluate_accuracy(DigitalExecutor(net), empty), RangeError);
}

TEST_CASE("synthetic digits are deterministic and in range") {
  SyntheticDigits gen;
  const Dataset a = gen.generate(50, 9), b = gen.generate(50, 9), c = gen.generate(50, 10);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  CHECK_FALSE(a.images == c.images);
  for (double v : a.images.data()) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("checkpoint and IDX round-trips") {
  const auto dir = std::filesystem::temp_directory_path() / "xbar_test_nn";
  std::filesystem::create_directories(dir);
  Network net = make_cnn({{1, 16, 16}, {8, 16}, {96}, 10, true});
  net.init(12);
  save_network(dir / "m.ckpt", net);
  const Network back = load_network(dir / "m.ckpt");
  CHECK(back.describe() == net.describe());
  for (std::size_t i = 0; i < net.params().size(); ++i) CHECK(*back.params()[i] == *net.params()[i]);

  SyntheticDigits gen;
  Dataset d = gen.generate(5, 1);
  for (auto& v : d.images.data()) v = std::round(v * 255.0) / 255.0;
  save_idx_images(dir / "img.idx", d.images);
  save_idx_labels(dir / "lbl.idx", d.labels);
  const Dataset r = load_idx_dataset(dir / "img.idx", dir / "lbl.idx");
  CHECK(r.labels == d.labels);
  for (std::size_t i = 0; i < d.images.size(); ++i) CHECK(r.images[i] == doctest::Approx(d.images[i]).epsilon(1e-15));
  CHECK_THROWS_AS(load_network(dir / "img.idx"), FormatError);
  std::filesystem::remove_all(dir);
}
