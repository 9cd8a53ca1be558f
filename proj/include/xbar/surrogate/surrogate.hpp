#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xbar/circuit/crossbar.hpp"
#include "xbar/nn/network.hpp"
#include "xbar/surrogate/dataset.hpp"

namespace xbar::surrogate {

struct TrainStats {
  int epochs = 0;
  double train_error = 0.0;       // mean relative error on the training split
  double validation_error = 0.0;  // mean relative error on the held-out split
  std::vector<double> loss;       // mean normalized MSE per epoch
};

/// Two-layer perceptron (input -> hidden ReLU -> C) over the normalized
/// features [v / v_max, g * r_on]. Its output h scales the ideal product:
///   I_ni = I_ideal * (1 - h(v, g))
/// so the network only has to learn the parasitic attenuation per column.
class SurrogateNet {
 public:
  SurrogateNet(const circuit::CrossbarGeometry& geometry, const circuit::DeviceModel& device,
               std::size_t hidden_dim, std::string geometry_id = {});

  const circuit::CrossbarGeometry& geometry() const { return geometry_; }
  const circuit::DeviceModel& device() const { return device_; }
  const std::string& geometry_id() const { return geometry_id_; }
  const Normalization& normalization() const { return norm_; }
  std::size_t input_dim() const { return geometry_.rows + geometry_.rows * geometry_.cols; }
  std::size_t hidden_dim() const { return hidden_; }
  std::size_t output_dim() const { return geometry_.cols; }
  nn::Network& mlp() { return mlp_; }
  const nn::Network& mlp() const { return mlp_; }
  TrainStats& stats() { return stats_; }
  const TrainStats& stats() const { return stats_; }

  /// Column currents in amperes for one (v, g).
  std::vector<double> predict(std::span<const double> v, const circuit::ConductanceMatrix& g) const;
  /// Batched form: v is N x R volts, g is N x R*C siemens; returns N x C amperes.
  nn::RowMatrix predict_batch(const nn::RowMatrix& v, const nn::RowMatrix& g) const;

  /// The surrogate specialised to one programmed tile: the conductance part of
  /// the first layer is folded into its bias once.
  class Bound {
   public:
    /// P x R volts -> P x C amperes.
    nn::RowMatrix currents(const nn::RowMatrix& v) const;

   private:
    friend class SurrogateNet;
    Eigen::MatrixXd g_;            // R x C siemens
    Eigen::MatrixXd w1v_;          // hidden x R
    Eigen::RowVectorXd bias1_;     // hidden, includes the folded conductance term
    Eigen::MatrixXd w2_;           // C x hidden
    Eigen::RowVectorXd bias2_;     // C
    double v_scale_ = 1.0;
  };
  Bound bind(const circuit::ConductanceMatrix& g) const;

  /// Normalized features [N, R + R*C] and ideal normalized currents [N, C].
  nn::Tensor features(const nn::RowMatrix& v, const nn::RowMatrix& g) const;
  nn::Tensor ideal_normalized(const nn::RowMatrix& v, const nn::RowMatrix& g) const;

 private:
  void check_tile(std::size_t rows, std::size_t cols) const;

  circuit::CrossbarGeometry geometry_;
  circuit::DeviceModel device_;
  std::string geometry_id_;
  std::size_t hidden_;
  Normalization norm_;
  nn::Network mlp_;
  TrainStats stats_;
};

struct SurrogateTrainOptions {
  std::size_t hidden_dim = 256;
  int epochs = 50;
  double lr = 0.1;
  std::size_t batch = 64;
  std::uint64_t seed = 1;
  std::string geometry_id;
};

using SurrogateEpochCallback = std::function<void(int epoch, const TrainStats&)>;

/// Mini-batch gradient descent on MSE of normalized currents. A non-finite
/// loss raises TrainingError with the epoch index.
SurrogateNet train_surrogate(const CircuitDataset& data, const SurrogateTrainOptions& options,
                             const SurrogateEpochCallback& on_epoch = {});

/// Mean over elements of |pred - true| / |true|, skipping elements whose true
/// current is at most 1e-3 of the largest one in the set. Rows [begin, end).
double mean_relative_error(const SurrogateNet& net, const CircuitDataset& data, std::size_t begin,
                           std::size_t end);
double validation_error(const SurrogateNet& net, const CircuitDataset& data);

void save_surrogate(const std::filesystem::path& path, const SurrogateNet& net);
SurrogateNet load_surrogate(const std::filesystem::path& path);

}  // namespace xbar::surrogate
