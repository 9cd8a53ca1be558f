#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xbar/attacks/executor.hpp"
#include "xbar/nn/train.hpp"

namespace xbar::attacks {

/// Probe images paired with the logits the queried executor returned.
struct SyntheticDataset {
  nn::Tensor x;
  nn::Tensor logits;
  std::size_t size() const { return x.batch(); }
};

/// Queries `exec` on every probe image in order (batches of `batch`).
SyntheticDataset build_synthetic_dataset(const nn::LogitsExecutor& exec, const nn::Tensor& probes,
                                         std::size_t batch = 256);

struct RegressionOptions {
  int epochs = 30;
  double lr = 0.15;
  std::size_t batch = 64;
  std::uint64_t seed = 1;
};

/// Mini-batch SGD on mean squared error between network output and target logits.
/// Targets are fitted after dividing by their RMS; the scale is folded back
/// into the final linear layer. Returns the final epoch's mean loss in logit units.
double train_logit_regressor(nn::Network& net, const SyntheticDataset& data, const RegressionOptions& opt);

/// Three CNNs of increasing width and depth for the given input shape.
std::vector<nn::CnnSpec> default_ensemble_specs(const nn::Shape& input, std::size_t classes);

struct Ensemble {
  std::vector<nn::Network> members;
};

Ensemble train_surrogate_ensemble(const SyntheticDataset& data, std::span<const nn::CnnSpec> specs,
                                  std::uint64_t seed, const RegressionOptions& opt = {});

/// Cross-entropy gradient of the uniformly averaged member logits.
class EnsembleGradient final : public GradientSource {
 public:
  explicit EnsembleGradient(const Ensemble& ensemble);
  nn::InputGradient gradient(const nn::Tensor& x, std::span<const int> labels) const override;
  std::string name() const override { return "ensemble"; }

 private:
  const Ensemble& ens_;
};

nn::InputGradient ensemble_gradient(const Ensemble& ensemble, const nn::Tensor& x, std::span<const int> labels);

/// Averaged logits, usable as an executor.
class EnsembleExecutor final : public nn::LogitsExecutor {
 public:
  explicit EnsembleExecutor(const Ensemble& e) : ens_(e) {}
  nn::Tensor logits(const nn::Tensor& x) const override;
  std::string name() const override { return "ensemble"; }

 private:
  const Ensemble& ens_;
};

}  // namespace xbar::attacks
