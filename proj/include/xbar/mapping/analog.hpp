#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xbar/mapping/backend.hpp"
#include "xbar/mapping/quant.hpp"
#include "xbar/mapping/tiles.hpp"
#include "xbar/nn/network.hpp"
#include "xbar/nn/train.hpp"

namespace xbar::mapping {

/// A linear or conv2d layer lowered to crossbars. The crossbar matrix is W^T
/// (fan_in x out); conv inputs are unrolled by im2col in (c, ky, kx) order.
struct MappedLayer {
  std::size_t layer_index = 0;
  nn::LayerKind kind = nn::LayerKind::Linear;
  std::size_t fan_in = 0;
  std::size_t out = 0;
  std::optional<nn::ConvGeometry> conv;
  QuantizedTensor weights;  // fan_in x out, row-major
  SlicedDigits digits;
  TileGrid grid;
  std::vector<double> bias;
};

MappedLayer map_layer(const nn::Layer& layer, std::size_t layer_index, const nn::Shape& input_shape,
                      const QuantConfig& qc, std::size_t tile_rows, std::size_t tile_cols,
                      const circuit::DeviceModel& device);

struct ExecOptions {
  /// Linear backends collapse slices and streams into one effective matrix
  /// per tile. Disable to run every stream/slice/side MVM separately.
  bool fold_linear = true;
};

/// A mapped layer programmed onto a backend.
class AnalogLayer {
 public:
  AnalogLayer(MappedLayer mapped, const ExecBackend& backend, const QuantConfig& qc, ExecOptions options = {});

  /// P x fan_in unsigned input integers -> P x out outputs before
  /// dequantization (exact integers on the ideal backend).
  RowMatrix integer_mvm(const RowMatrix& x_int) const;
  /// Quantize inputs per sample, run the crossbars, dequantize, add bias.
  nn::Tensor forward(const nn::Tensor& x) const;

  const MappedLayer& mapped() const { return m_; }
  bool folded() const { return !folded_.empty(); }

 private:
  RowMatrix rows_for(const nn::Tensor& x, std::vector<double>& scale_of_row, bool negative_part, bool& any) const;

  MappedLayer m_;
  QuantConfig qc_;
  std::vector<std::vector<std::unique_ptr<BoundTile>>> pos_, neg_;  // [tile][slice]
  std::vector<Eigen::MatrixXd> folded_;                             // [tile]
};

/// The network with every affine layer executed on crossbars; everything else
/// (relu, pooling, flatten, residual adds) stays digital.
class AnalogNetwork final : public nn::AffineHook, public nn::LogitsExecutor {
 public:
  AnalogNetwork(const nn::Network& net, std::shared_ptr<const ExecBackend> backend, const QuantConfig& qc,
                std::pair<std::size_t, std::size_t> tile = {64, 64}, ExecOptions options = {});

  nn::Tensor apply(std::size_t layer_index, const nn::Layer& layer, const nn::Tensor& x) const override;
  nn::Tensor logits(const nn::Tensor& x) const override;
  std::string name() const override { return backend_->name(); }

  /// Forward pass recording every activation (affine outputs are analog).
  nn::Trace trace(const nn::Tensor& x) const { return net_.forward_trace(x, this); }
  const nn::Network& network() const { return net_; }
  const ExecBackend& backend() const { return *backend_; }
  const QuantConfig& quant() const { return qc_; }
  std::vector<const MappedLayer*> mapped_layers() const;

 private:
  nn::Network net_;
  std::shared_ptr<const ExecBackend> backend_;
  QuantConfig qc_;
  std::map<std::size_t, AnalogLayer> layers_;
};

nn::Tensor execute_layer_analog(const MappedLayer& mapped, const nn::Tensor& x, const ExecBackend& backend,
                                const QuantConfig& qc);
nn::Tensor execute_network_analog(const nn::Network& net, const nn::Tensor& x,
                                  std::shared_ptr<const ExecBackend> backend, const QuantConfig& qc,
                                  std::pair<std::size_t, std::size_t> tile = {64, 64});

}  // namespace xbar::mapping
