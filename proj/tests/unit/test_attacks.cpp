#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "xbar/attacks/ensemble.hpp"
#include "xbar/attacks/executor.hpp"
#include "xbar/attacks/pgd.hpp"
#include "xbar/attacks/result_csv.hpp"
#include "xbar/attacks/scenario.hpp"
#include "xbar/attacks/square.hpp"
#include "xbar/attacks/threat.hpp"
#include "xbar/circuit/model_file.hpp"
#include "xbar/common/error.hpp"
#include "xbar/common/rng.hpp"
#include "xbar/mapping/analog.hpp"
#include "xbar/nn/dataset.hpp"
#include "xbar/nn/loss.hpp"
#include "xbar/nn/train.hpp"

using namespace xbar;
using namespace xbar::attacks;

namespace {

// A small digit classifier shared by the property tests (trained once).
const nn::Network& toy_model() {
  static const nn::Network net = [] {
    auto n = nn::make_cnn({});
    n.init(42);
    const auto train = nn::SyntheticDigits{}.generate(1500, 100);
    nn::TrainOptions opt;
    opt.epochs = 8;
    opt.seed = 7;
    nn::train_classifier(n, train, nullptr, opt);
    return n;
  }();
  return net;
}

const nn::Dataset& eval_set() {
  static const nn::Dataset d = nn::SyntheticDigits{}.generate(100, 200);
  return d;
}

std::shared_ptr<const mapping::AnalogNetwork> hardware(const std::string& preset, double r_wire) {
  auto m = circuit::preset(preset);
  m.geometry.r_wire = r_wire;
  auto be = std::make_shared<mapping::CircuitBackend>(m);
  return std::make_shared<const mapping::AnalogNetwork>(toy_model(), be, mapping::QuantConfig{},
                                                        std::make_pair(m.geometry.rows, m.geometry.cols));
}

double rel_l2(const nn::Tensor& a, const nn::Tensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

double accuracy_on(const nn::LogitsExecutor& exec, const nn::Tensor& x, const std::vector<int>& y) {
  const auto p = nn::argmax_rows(exec.logits(x));
  std::size_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += p[i] == y[i];
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

class CountingExecutor final : public nn::LogitsExecutor {
 public:
  explicit CountingExecutor(const nn::Network& n) : net_(n) {}
  nn::Tensor logits(const nn::Tensor& x) const override {
    images_ += x.batch();
    return net_.forward(x);
  }
  std::string name() const override { return "counting"; }
  mutable std::size_t images_ = 0;

 private:
  const nn::Network& net_;
};

}  // namespace

TEST_CASE("threat scenarios encode the four knowledge rows") {
  const auto nbb = scenario_by_name("nonadaptive-blackbox");
  CHECK_FALSE(nbb.knows_weights);
  CHECK(nbb.digital_logits);
  CHECK_FALSE(nbb.digital_activations);
  CHECK_FALSE(nbb.attacker_crossbar);
  CHECK_FALSE(nbb.analog_logits);

  const auto nwb = scenario_by_name("nonadaptive-whitebox");
  CHECK(nwb.knows_weights);
  CHECK(nwb.digital_logits);
  CHECK(nwb.digital_activations);
  CHECK_FALSE(nwb.adaptive());

  const auto abb = scenario_by_name("adaptive-blackbox", "64x64_100k");
  CHECK_FALSE(abb.knows_weights);
  CHECK(abb.analog_logits);
  CHECK_FALSE(abb.analog_activations);
  CHECK(abb.adaptive());

  const auto awb = scenario_by_name("adaptive-whitebox", "64x64_100k");
  CHECK(awb.knows_weights);
  CHECK(awb.analog_logits);
  CHECK(awb.analog_activations);
  CHECK(*awb.attacker_crossbar == "64x64_100k");

  CHECK_THROWS_AS(scenario_by_name("adaptive-whitebox"), ConfigError);
  CHECK_THROWS_AS(scenario_by_name("nonadaptive-whitebox", "64x64_100k"), ConfigError);
  CHECK_THROWS_AS(scenario_by_name("grey-box"), ConfigError);
  CHECK(attack_allowed(nwb, AttackKind::Pgd));
  CHECK_FALSE(attack_allowed(nwb, AttackKind::Square));
  CHECK(attack_allowed(nbb, AttackKind::Square));
  CHECK(attack_allowed(nbb, AttackKind::Ensemble));
  CHECK_FALSE(attack_allowed(nbb, AttackKind::Pgd));
}

TEST_CASE("AttackConfig invariants and projection") {
  CHECK_NOTHROW(AttackConfig::pgd(8.0 / 255).validate());
  CHECK(AttackConfig::pgd(0.08).alpha == doctest::Approx(0.02));
  CHECK_THROWS_AS((AttackConfig{0.1, 0.2, 3, 0}).validate(), RangeError);
  CHECK_THROWS_AS((AttackConfig{1.5, 0.1, 3, 0}).validate(), RangeError);
  CHECK_THROWS_AS((AttackConfig{0.1, 0.1, -1, 0}).validate(), RangeError);
  // 0.9 + 0.2 hits both the epsilon ball (1.05) and the pixel box (1.0).
  CHECK(project(0.9 + 0.2, 0.9, 0.15) == 1.0);
  CHECK(project(0.1 - 0.3, 0.1, 0.15) == 0.0);
  CHECK(project(0.5 + 0.3, 0.5, 0.15) == doctest::Approx(0.65));
}

TEST_CASE("PGD: epsilon 0 is the identity; one step on a linear-softmax model") {
  const auto& d = eval_set();
  const auto x = d.images.slice_batch(0, 5);
  std::vector<int> y(d.labels.begin(), d.labels.begin() + 5);
  DigitalGradient g(toy_model());
  const auto adv = pgd_attack(g, x, y, AttackConfig::pgd(0.0));
  CHECK(adv.x_star == x);

  nn::Network lin({4});
  lin.emplace<nn::Linear>(4, 3);
  auto& L = dynamic_cast<nn::Linear&>(lin.layer(0));
  const double W[3][4] = {{0.5, -1.0, 0.2, 0.0}, {-0.3, 0.4, 0.9, -0.7}, {0.1, 0.1, -0.6, 0.8}};
  for (int o = 0; o < 3; ++o)
    for (int i = 0; i < 4; ++i) L.weight()[static_cast<std::size_t>(o * 4 + i)] = W[o][i];
  nn::Tensor xl({1, 4}, std::vector<double>{0.5, 0.4, 0.6, 0.5});
  const std::vector<int> yl{1};
  // Closed form: dCE/dx = W^T (softmax(Wx) - e_y)
  double z[3], p[3], zmax = -1e9, den = 0.0;
  for (int o = 0; o < 3; ++o) {
    z[o] = 0.0;
    for (int i = 0; i < 4; ++i) z[o] += W[o][i] * xl[static_cast<std::size_t>(i)];
    zmax = std::max(zmax, z[o]);
  }
  for (int o = 0; o < 3; ++o) den += std::exp(z[o] - zmax);
  for (int o = 0; o < 3; ++o) p[o] = std::exp(z[o] - zmax) / den - (o == 1 ? 1.0 : 0.0);
  AttackConfig cfg{0.1, 0.025, 1, 0};
  const auto one = pgd_attack(DigitalGradient(lin), xl, yl, cfg);
  for (int i = 0; i < 4; ++i) {
    double gi = 0.0;
    for (int o = 0; o < 3; ++o) gi += W[o][i] * p[o];
    const double s = gi > 0 ? 1.0 : (gi < 0 ? -1.0 : 0.0);
    CHECK(one.x_star[static_cast<std::size_t>(i)] - xl[static_cast<std::size_t>(i)] == doctest::Approx(0.025 * s));
  }
}

TEST_CASE("PGD respects the budget and is monotone in epsilon on the digital model") {
  const auto& d = eval_set();
  DigitalGradient g(toy_model());
  const nn::DigitalExecutor exec(toy_model());
  double prev = 2.0;
  for (double e : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    const auto adv = pgd_attack(g, d.images, d.labels, AttackConfig::pgd(e / 255));
    CHECK(max_perturbation(adv.x_star, d.images) <= e / 255 + 1e-9);
    for (double v : adv.x_star.data()) CHECK((v >= 0.0 && v <= 1.0));
    const double acc = accuracy_on(exec, adv.x_star, d.labels);
    CHECK(acc <= prev + 0.01);
    prev = acc;
  }
  CHECK(prev < accuracy_on(exec, d.images, d.labels));
}

TEST_CASE("margin loss and patch schedule") {
  const std::vector<double> l{1.0, 3.0, 2.0};
  CHECK(margin_loss(l, 1) == -1.0);
  CHECK(margin_loss(l, 0) == 2.0);
  CHECK_THROWS_AS(margin_loss(l, 3), RangeError);
  CHECK(square_side(0.1, 0, 1000, 16, 16) == 6);    // ceil(sqrt(25.6))
  CHECK(square_side(0.1, 50, 1000, 16, 16) == 4);   // p = 0.05
  CHECK(square_side(0.1, 200, 1000, 16, 16) == 3);  // p = 0.025
  CHECK(square_side(0.1, 999, 1000, 16, 16) == 2);  // p = 0.0125 -> ceil(1.79)
  CHECK(square_side(1.0, 0, 10, 4, 4) == 4);
}

TEST_CASE("Square Attack: zero budget, error, strictly increasing accepted losses, query accounting") {
  const auto& d = eval_set();
  const auto x = d.images.slice_batch(0, 20);
  std::vector<int> y(d.labels.begin(), d.labels.begin() + 20);
  CountingExecutor exec(toy_model());

  auto none = square_attack(exec, x, y, {16.0 / 255, 0, 0.1, 1, 0});
  CHECK(none.x_star == x);
  CHECK(exec.images_ == 0);
  mark_success(none, nn::DigitalExecutor(toy_model()));
  const auto clean_pred = nn::argmax_rows(toy_model().forward(x));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(none.success[i] == (clean_pred[i] != y[i]));

  CHECK_THROWS_AS(square_attack(exec, x, y, {0.1, -1, 0.1, 1, 0}), RangeError);

  AcceptLog log;
  const auto adv = square_attack(exec, x, y, {16.0 / 255, 200, 0.1, 3, 0}, &log);
  CHECK(max_perturbation(adv.x_star, x) <= 16.0 / 255 + 1e-9);
  std::size_t total = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t k = 1; k < log[i].size(); ++k) CHECK(log[i][k] > log[i][k - 1]);
    CHECK(adv.queries[i] <= 200);
    CHECK(adv.queries[i] >= 1);
    // Stops early only on success.
    if (adv.queries[i] < 200) CHECK(adv.success[i]);
    total += adv.queries[i];
  }
  CHECK(exec.images_ == total);

  // Per-image streams: attacking a sub-batch with the right offset reproduces the rows.
  const auto sub = square_attack(exec, x.slice_batch(5, 5), std::vector<int>(y.begin() + 5, y.begin() + 10),
                                 {16.0 / 255, 200, 0.1, 3, 5});
  for (std::size_t i = 0; i < 5; ++i) CHECK(sub.queries[i] == adv.queries[i + 5]);
  CHECK(sub.x_star == adv.x_star.slice_batch(5, 5));
}

TEST_CASE("synthetic dataset: error on empty probes, determinism, analog differs from digital") {
  const nn::DigitalExecutor dig(toy_model());
  CHECK_THROWS_AS(build_synthetic_dataset(dig, nn::Tensor({0, 1, 16, 16})), RangeError);
  const auto probes = nn::SyntheticDigits{}.generate(30, 300).images;
  const auto a = build_synthetic_dataset(dig, probes, 7);
  const auto a2 = build_synthetic_dataset(dig, probes, 7);
  const auto b = build_synthetic_dataset(dig, probes, 100);
  CHECK(a.logits == a2.logits);
  CHECK(rel_l2(b.logits, a.logits) <= 1e-12);
  CHECK(a.size() == 30);
  const auto hw = hardware("64x64_100k", 12.23);
  const auto c = build_synthetic_dataset(*hw, probes);
  CHECK(rel_l2(c.logits, a.logits) > 1e-3);
}

TEST_CASE("surrogate ensemble: degenerate fit, learning curve, determinism") {
  // Identical points: every member converges to the shared logit vector.
  const auto one = nn::SyntheticDigits{}.generate(1, 5).images;
  std::vector<nn::Tensor> copies(64, one);
  SyntheticDataset same{nn::concat_batch(copies), {}};
  nn::Tensor target({64, 10});
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t k = 0; k < 10; ++k) target[i * 10 + k] = static_cast<double>(k) * 0.3 - 1.0;
  same.logits = target;
  const auto specs = default_ensemble_specs({1, 16, 16}, 10);
  REQUIRE(specs.size() == 3);
  RegressionOptions ro;
  ro.epochs = 200;
  const auto ens = train_surrogate_ensemble(same, specs, 3, ro);
  for (const auto& m : ens.members) {
    const auto out = m.forward(one);
    for (std::size_t k = 0; k < 10; ++k) CHECK(std::abs(out[k] - target[k]) <= 0.02);
  }

  const nn::DigitalExecutor dig(toy_model());
  const auto probes = nn::SyntheticDigits{}.generate(900, 301).images;
  const auto held = build_synthetic_dataset(dig, nn::SyntheticDigits{}.generate(200, 302).images);
  auto held_mse = [&](std::size_t n) {
    const auto data = build_synthetic_dataset(dig, probes.slice_batch(0, n));
    auto net = nn::make_cnn(specs[1]);
    net.init(9);
    RegressionOptions o;
    o.epochs = 15;
    train_logit_regressor(net, data, o);
    return nn::mse(net.forward(held.x), held.logits).loss;
  };
  CHECK(held_mse(900) < held_mse(100));

  const auto small = build_synthetic_dataset(dig, probes.slice_batch(0, 50));
  RegressionOptions quick;
  quick.epochs = 2;
  const auto e1 = train_surrogate_ensemble(small, specs, 11, quick);
  const auto e2 = train_surrogate_ensemble(small, specs, 11, quick);
  for (std::size_t m = 0; m < 3; ++m)
    CHECK(e1.members[m].params()[0]->values() == e2.members[m].params()[0]->values());
}

TEST_CASE("ensemble gradient: single member, permutation symmetry, finite differences") {
  const auto& d = eval_set();
  const auto x = d.images.slice_batch(0, 3);
  std::vector<int> y(d.labels.begin(), d.labels.begin() + 3);
  Ensemble single;
  single.members.push_back(toy_model());
  const auto gs = ensemble_gradient(single, x, y);
  const auto gd = nn::loss_and_input_grad(toy_model(), x, y);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(gs.grad_x[i] == doctest::Approx(gd.grad_x[i]).epsilon(1e-12));

  Ensemble ens;
  for (int s = 0; s < 3; ++s) {
    auto n = nn::make_cnn(default_ensemble_specs({1, 16, 16}, 10)[static_cast<std::size_t>(s)]);
    n.init(static_cast<std::uint64_t>(s + 50));
    ens.members.push_back(std::move(n));
  }
  Ensemble rev;
  rev.members = {ens.members[2], ens.members[0], ens.members[1]};
  const auto g1 = ensemble_gradient(ens, x, y), g2 = ensemble_gradient(rev, x, y);
  CHECK(rel_l2(g2.grad_x, g1.grad_x) <= 1e-12);

  // Central differences of the summed averaged-logit loss.
  const EnsembleExecutor avg(ens);
  auto loss = [&](const nn::Tensor& xx) {
    double s = 0.0;
    for (double v : nn::cross_entropy_per_sample(avg.logits(xx), y)) s += v;
    return s;
  };
  Rng rng = make_rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t i = pick(rng);
    const double h = 1e-5;
    nn::Tensor xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (loss(xp) - loss(xm)) / (2 * h);
    worst = std::max(worst, std::abs(fd - g1.grad_x[i]) / std::max(1e-3, std::abs(fd)));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("hardware-in-loop gradient") {
  const auto& d = eval_set();
  const auto x = d.images.slice_batch(0, 8);
  std::vector<int> y(d.labels.begin(), d.labels.begin() + 8);
  const auto digital = nn::loss_and_input_grad(toy_model(), x, y);

  circuit::CrossbarModel ideal;
  ideal.name = "zero";
  ideal.geometry = {64, 64, 0.0, 0.0, 0.0};
  auto zero_hw = [&](int bits) {
    mapping::QuantConfig q;
    q.input_bits = q.weight_bits = bits;
    return std::make_shared<const mapping::AnalogNetwork>(
        toy_model(), std::make_shared<mapping::CircuitBackend>(ideal), q, std::make_pair(64, 64));
  };
  const auto h8 = hil_gradient(*zero_hw(8), x, y);
  const auto h12 = hil_gradient(*zero_hw(12), x, y);
  CHECK(h8.grad_x.shape() == x.shape());
  const auto h16 = hil_gradient(*zero_hw(16), x, y);
  const double e8 = rel_l2(h8.grad_x, digital.grad_x), e12 = rel_l2(h12.grad_x, digital.grad_x),
               e16 = rel_l2(h16.grad_x, digital.grad_x);
  // The residual is quantization: it must vanish with more bits.
  CHECK(e8 <= 1e-1);
  CHECK(e12 <= 5e-2);
  CHECK(e16 <= 1e-3);
  CHECK(e16 < e12);
  CHECK(e12 < e8);

  const auto lossy = hardware("64x64_100k", 12.23);
  const auto hl = HilGradient(lossy).gradient(x, y);
  CHECK(hl.grad_x.shape() == x.shape());
  double mad = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::isfinite(hl.grad_x[i]));
    mad += std::abs(hl.grad_x[i] - digital.grad_x[i]);
  }
  CHECK(mad / static_cast<double>(x.size()) > 0.0);
}

TEST_CASE("run_scenario: collapse to plain PGD, resource checks, CSV") {
  const auto& d = eval_set();
  const nn::DigitalExecutor dig(toy_model());
  AttackerResources res{&toy_model(), nullptr, nullptr};
  ScenarioParams p;
  p.epsilon = 8.0 / 255;
  p.chunk = 33;
  const auto r = run_scenario(scenario_by_name("nonadaptive-whitebox"), AttackKind::Pgd, dig, d, p, res);
  const auto plain = pgd_attack(DigitalGradient(toy_model()), d.images, d.labels, AttackConfig::pgd(8.0 / 255));
  CHECK(r.adv_acc == accuracy_on(dig, plain.x_star, d.labels));
  CHECK(r.clean_acc == accuracy_on(dig, d.images, d.labels));
  CHECK(r.delta == doctest::Approx(r.adv_acc - r.clean_acc));
  CHECK(r.target_backend == "digital");
  CHECK(r.attacker_backend == "digital");
  CHECK(r.iters_or_queries == 30);

  CHECK_THROWS_AS(run_scenario(scenario_by_name("nonadaptive-whitebox"), AttackKind::Square, dig, d, p, res),
                  ConfigError);
  CHECK_THROWS_AS(
      run_scenario(scenario_by_name("adaptive-whitebox", "64x64_100k"), AttackKind::Pgd, dig, d, p, res), ConfigError);
  CHECK_THROWS_AS(run_scenario(scenario_by_name("nonadaptive-blackbox"), AttackKind::Ensemble, dig, d, p, res),
                  ConfigError);

  ScenarioParams sp = p;
  sp.square_queries = 20;
  const auto sq = run_scenario(scenario_by_name("nonadaptive-blackbox"), AttackKind::Square, dig, d.slice(0, 10), sp, res);
  CHECK(sq.iters_or_queries == 20);
  CHECK(sq.mean_queries <= 20.0);

  const std::vector<ScenarioResult> rows{r, sq};
  const auto text = results_to_csv(rows);
  CHECK(text.rfind(result_csv_header() + "\n", 0) == 0);
  const auto back = results_from_csv(text);
  REQUIRE(back.size() == 2);
  CHECK(back[1].attack == "square");
  CHECK(back[0].adv_acc == doctest::Approx(r.adv_acc).epsilon(1e-6));
  CHECK(results_to_csv(back) == text);
  CHECK_THROWS_AS(results_from_csv("bad header\n"), FormatError);
  CHECK_THROWS_AS(results_from_csv(result_csv_header() + "\na,b\n"), FormatError);
}
