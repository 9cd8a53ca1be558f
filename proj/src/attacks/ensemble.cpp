#include "xbar/attacks/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xbar/common/error.hpp"
#include "xbar/common/rng.hpp"

namespace xbar::attacks {

SyntheticDataset build_synthetic_dataset(const nn::LogitsExecutor& exec, const nn::Tensor& probes,
                                         std::size_t batch) {
  if (probes.empty() || probes.batch() == 0) throw RangeError("synthetic dataset needs at least one probe");
  if (batch == 0) throw RangeError("batch size must be positive");
  std::vector<nn::Tensor> parts;
  for (std::size_t b = 0; b < probes.batch(); b += batch)
    parts.push_back(exec.logits(probes.slice_batch(b, std::min(batch, probes.batch() - b))));
  return {probes, nn::concat_batch(parts)};
}

double train_logit_regressor(nn::Network& net, const SyntheticDataset& data, const RegressionOptions& opt) {
  if (data.size() == 0) throw RangeError("empty regression dataset");
  if (opt.batch == 0 || !(opt.lr > 0.0)) throw RangeError("regression needs a positive batch and learning rate");
  auto* head = dynamic_cast<nn::Linear*>(&net.layer(net.size() - 1));
  if (!head) throw ConfigError("logit regressor must end in a linear layer");
  // Fit RMS-normalized logits, then fold the scale into the output layer.
  double ss = 0.0;
  for (double v : data.logits.data()) ss += v * v;
  const double scale = ss > 0.0 ? std::sqrt(ss / static_cast<double>(data.logits.size())) : 1.0;
  nn::Tensor targets = data.logits;
  for (auto& v : targets.data()) v /= scale;

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  double last = 0.0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(opt.seed, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < n; b += opt.batch) {
      const std::size_t m = std::min(opt.batch, n - b);
      std::span<const std::size_t> idx(order.data() + b, m);
      const auto xb = data.x.gather_batch(idx);
      const auto yb = targets.gather_batch(idx);
      const auto trace = net.forward_trace(xb);
      auto l = nn::mse(trace.output(), yb);
      if (!std::isfinite(l.loss)) throw TrainingError("non-finite regression loss", epoch);
      auto grads = net.zero_param_grads();
      net.backward(trace, l.grad, &grads);
      nn::sgd_step(net, grads, opt.lr);
      total += l.loss * static_cast<double>(m);
    }
    last = total / static_cast<double>(n);
  }
  for (auto& v : head->weight().data()) v *= scale;
  for (auto& v : head->bias().data()) v *= scale;
  return last * scale * scale;
}

std::vector<nn::CnnSpec> default_ensemble_specs(const nn::Shape& input, std::size_t classes) {
  nn::CnnSpec small{input, {4, 8}, {48}, classes, false};
  nn::CnnSpec medium{input, {8, 16}, {96}, classes, false};
  nn::CnnSpec large{input, {12, 24}, {128}, classes, true};
  return {small, medium, large};
}

Ensemble train_surrogate_ensemble(const SyntheticDataset& data, std::span<const nn::CnnSpec> specs,
                                  std::uint64_t seed, const RegressionOptions& opt) {
  if (specs.empty()) throw ConfigError("ensemble needs at least one member");
  Ensemble e;
  for (std::size_t m = 0; m < specs.size(); ++m) {
    auto net = nn::make_cnn(specs[m]);
    net.init(mix_seed(seed, m));
    RegressionOptions o = opt;
    o.seed = mix_seed(seed, 100 + m);
    train_logit_regressor(net, data, o);
    e.members.push_back(std::move(net));
  }
  return e;
}

nn::Tensor EnsembleExecutor::logits(const nn::Tensor& x) const {
  if (ens_.members.empty()) throw ConfigError("empty ensemble");
  nn::Tensor sum = ens_.members[0].forward(x);
  for (std::size_t m = 1; m < ens_.members.size(); ++m) {
    const auto l = ens_.members[m].forward(x);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += l[i];
  }
  const double inv = 1.0 / static_cast<double>(ens_.members.size());
  for (auto& v : sum.data()) v *= inv;
  return sum;
}

nn::InputGradient ensemble_gradient(const Ensemble& ensemble, const nn::Tensor& x, std::span<const int> labels) {
  if (ensemble.members.empty()) throw ConfigError("empty ensemble");
  const double inv = 1.0 / static_cast<double>(ensemble.members.size());
  std::vector<nn::Trace> traces;
  nn::Tensor avg;
  for (const auto& net : ensemble.members) {
    traces.push_back(net.forward_trace(x));
    if (avg.empty()) {
      avg = nn::Tensor(traces.back().output().shape());
    }
    const auto& l = traces.back().output();
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += l[i];
  }
  for (auto& v : avg.data()) v *= inv;
  auto ce = nn::softmax_cross_entropy(avg, labels);
  const double n = static_cast<double>(x.batch());
  for (auto& g : ce.grad.data()) g *= n * inv;
  nn::InputGradient out;
  out.loss = ce.loss * n;
  out.logits = avg;
  for (std::size_t m = 0; m < ensemble.members.size(); ++m) {
    auto g = ensemble.members[m].backward(traces[m], ce.grad);
    if (out.grad_x.empty()) {
      out.grad_x = std::move(g);
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) out.grad_x[i] += g[i];
    }
  }
  return out;
}

EnsembleGradient::EnsembleGradient(const Ensemble& ensemble) : ens_(ensemble) {
  if (ens_.members.empty()) throw ConfigError("empty ensemble");
}

nn::InputGradient EnsembleGradient::gradient(const nn::Tensor& x, std::span<const int> labels) const {
  return ensemble_gradient(ens_, x, labels);
}

}  // namespace xbar::attacks
