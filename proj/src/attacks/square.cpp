#include "xbar/attacks/square.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xbar/common/error.hpp"
#include "xbar/common/rng.hpp"

namespace xbar::attacks {

double margin_loss(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) throw RangeError("label out of range");
  double other = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (static_cast<int>(k) != label) other = std::max(other, logits[k]);
  return other - logits[static_cast<std::size_t>(label)];
}

std::size_t square_side(double p_init, long query, long budget, std::size_t h, std::size_t w) {
  double p = p_init;
  const double frac = budget > 0 ? static_cast<double>(query) / static_cast<double>(budget) : 0.0;
  for (double cut : {0.05, 0.2, 0.5})
    if (frac >= cut) p /= 2.0;
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(p * static_cast<double>(h * w))));
  return std::clamp<std::size_t>(side, 1, std::min(h, w));
}

namespace {

struct ImageState {
  std::vector<double> delta;  // current perturbation, entries +-eps
  double loss = 0.0;
  long queries = 0;
  bool done = false;
  Rng rng;
};

void apply_delta(std::span<const double> x, std::span<const double> delta, std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i] + delta[i], 0.0, 1.0);
}

}  // namespace

AdvBatch square_attack(const nn::LogitsExecutor& exec, const nn::Tensor& x, std::span<const int> labels,
                       const SquareOptions& opt, AcceptLog* log) {
  if (opt.max_queries < 0) throw RangeError("max_queries must be non-negative");
  if (!(opt.epsilon >= 0.0 && opt.epsilon <= 1.0)) throw RangeError("epsilon must lie in [0, 1]");
  if (!(opt.p_init > 0.0 && opt.p_init <= 1.0)) throw RangeError("p_init must lie in (0, 1]");
  if (x.rank() != 4) throw ShapeError("square attack expects [N,C,H,W] images");
  if (labels.size() != x.batch()) throw ShapeError("one label per image is required");
  for (double v : x.data())
    if (!(v >= 0.0 && v <= 1.0)) throw RangeError("attack inputs must lie in [0, 1]");

  const std::size_t n = x.batch(), c = x.dim(1), h = x.dim(2), w = x.dim(3), per = c * h * w;
  AdvBatch adv{x, {labels.begin(), labels.end()}, std::vector<std::size_t>(n, 0), std::vector<bool>(n, false)};
  if (log) log->assign(n, {});
  if (opt.max_queries == 0 || n == 0) return adv;

  const double eps = opt.epsilon;
  std::vector<ImageState> st(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = st[i];
    s.rng = make_rng(opt.seed, opt.index_offset + i);
    s.delta.assign(per, 0.0);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t col = 0; col < w; ++col) {
        const double v = coin(s.rng) ? eps : -eps;
        for (std::size_t row = 0; row < h; ++row) s.delta[(ch * h + row) * w + col] = v;
      }
  }

  auto x_at = [&](std::size_t i) { return std::span<const double>(x.ptr() + i * per, per); };
  auto out_at = [&](std::size_t i) { return std::span<double>(adv.x_star.ptr() + i * per, per); };

  // Initialization query.
  for (std::size_t i = 0; i < n; ++i) apply_delta(x_at(i), st[i].delta, out_at(i));
  {
    const auto logits = exec.logits(adv.x_star);
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
      st[i].loss = margin_loss({logits.ptr() + i * k, k}, labels[i]);
      st[i].queries = 1;
      st[i].done = st[i].loss > 0.0 || opt.max_queries <= 1;
      if (log) log->at(i).push_back(st[i].loss);
    }
  }

  std::vector<std::size_t> active;
  std::vector<std::vector<double>> proposal(n);
  for (;;) {
    active.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (!st[i].done) active.push_back(i);
    if (active.empty()) break;

    nn::Tensor batch({active.size(), c, h, w});
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t i = active[a];
      auto& s = st[i];
      const std::size_t side = square_side(opt.p_init, s.queries - 1, opt.max_queries - 1, h, w);
      std::uniform_int_distribution<std::size_t> pr(0, h - side), pc(0, w - side);
      std::bernoulli_distribution coin(0.5);
      const std::size_t r0 = pr(s.rng), c0 = pc(s.rng);
      proposal[i] = s.delta;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = coin(s.rng) ? eps : -eps;
        for (std::size_t r = r0; r < r0 + side; ++r)
          for (std::size_t q = c0; q < c0 + side; ++q) proposal[i][(ch * h + r) * w + q] = v;
      }
      apply_delta(x_at(i), proposal[i], {batch.ptr() + a * per, per});
    }

    const auto logits = exec.logits(batch);
    const std::size_t k = logits.dim(1);
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t i = active[a];
      auto& s = st[i];
      ++s.queries;
      const double loss = margin_loss({logits.ptr() + a * k, k}, labels[i]);
      if (loss > s.loss) {
        s.loss = loss;
        s.delta.swap(proposal[i]);
        std::copy_n(batch.ptr() + a * per, per, out_at(i).begin());
        if (log) log->at(i).push_back(loss);
      }
      if (s.loss > 0.0 || s.queries >= opt.max_queries) s.done = true;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    adv.queries[i] = static_cast<std::size_t>(st[i].queries);
    adv.success[i] = st[i].loss > 0.0;
  }
  return adv;
}

}  // namespace xbar::attacks
