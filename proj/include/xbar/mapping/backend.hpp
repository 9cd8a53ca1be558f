#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "xbar/circuit/model_file.hpp"
#include "xbar/circuit/nodal.hpp"
#include "xbar/mapping/quant.hpp"
#include "xbar/nn/tensor.hpp"
#include "xbar/surrogate/surrogate.hpp"

namespace xbar::mapping {

using nn::RowMatrix;

enum class BackendKind { IdealDigital, CircuitNonIdeal, Surrogate };

std::string to_string(BackendKind k);

/// One programmed crossbar on a backend, queried in the digit domain: each
/// column output is (I - I_baseline) / (v_step * g_step), where v_step is the
/// voltage of one stream digit and g_step the conductance of one slice digit.
/// Ideal hardware therefore returns exactly b * D for stream digits b and
/// slice digits D.
class BoundTile {
 public:
  virtual ~BoundTile() = default;
  /// P x R stream digits -> P x C digit-domain column outputs.
  virtual RowMatrix digit_mvm(const RowMatrix& stream_digits) const = 0;
  /// Linear backends: E (R x C) with digit_mvm(b) == b * E for every b.
  virtual const Eigen::MatrixXd* effective() const { return nullptr; }
};

class ExecBackend {
 public:
  virtual ~ExecBackend() = default;
  virtual BackendKind kind() const = 0;
  virtual std::string name() const = 0;
  /// Tile shape the backend models, or nullopt when any shape works.
  virtual std::optional<std::pair<std::size_t, std::size_t>> required_tile() const = 0;
  virtual const circuit::DeviceModel& device() const = 0;
  virtual std::unique_ptr<BoundTile> bind(const circuit::ConductanceMatrix& g, const QuantConfig& qc) const = 0;
};

/// Exact integer dot products on the digits the conductances encode.
class IdealDigitalBackend final : public ExecBackend {
 public:
  explicit IdealDigitalBackend(circuit::DeviceModel device = {}) : device_(device) {}
  BackendKind kind() const override { return BackendKind::IdealDigital; }
  std::string name() const override { return "ideal"; }
  std::optional<std::pair<std::size_t, std::size_t>> required_tile() const override { return std::nullopt; }
  const circuit::DeviceModel& device() const override { return device_; }
  std::unique_ptr<BoundTile> bind(const circuit::ConductanceMatrix& g, const QuantConfig& qc) const override;

 private:
  circuit::DeviceModel device_;
};

/// Resistive-mesh solve of every crossbar. Linear devices are reduced to the
/// tile's transfer matrix once per binding; exponential devices are solved per
/// input vector.
class CircuitBackend final : public ExecBackend {
 public:
  explicit CircuitBackend(circuit::CrossbarModel model, circuit::SolverOptions options = {});
  BackendKind kind() const override { return BackendKind::CircuitNonIdeal; }
  std::string name() const override { return model_.name.empty() ? "circuit" : model_.name; }
  std::optional<std::pair<std::size_t, std::size_t>> required_tile() const override {
    return std::make_pair(model_.geometry.rows, model_.geometry.cols);
  }
  const circuit::DeviceModel& device() const override { return model_.device; }
  const circuit::CrossbarModel& model() const { return model_; }
  std::unique_ptr<BoundTile> bind(const circuit::ConductanceMatrix& g, const QuantConfig& qc) const override;

 private:
  circuit::CrossbarModel model_;
  circuit::SolverOptions options_;
  Eigen::MatrixXd baseline_transfer_;  // linear devices only
};

/// Learned crossbar model standing in for the mesh solve.
class SurrogateBackend final : public ExecBackend {
 public:
  SurrogateBackend(std::shared_ptr<const surrogate::SurrogateNet> net, std::string name = {});
  BackendKind kind() const override { return BackendKind::Surrogate; }
  std::string name() const override { return name_; }
  std::optional<std::pair<std::size_t, std::size_t>> required_tile() const override {
    return std::make_pair(net_->geometry().rows, net_->geometry().cols);
  }
  const circuit::DeviceModel& device() const override { return net_->device(); }
  std::unique_ptr<BoundTile> bind(const circuit::ConductanceMatrix& g, const QuantConfig& qc) const override;

 private:
  std::shared_ptr<const surrogate::SurrogateNet> net_;
  std::string name_;
};

}  // namespace xbar::mapping
