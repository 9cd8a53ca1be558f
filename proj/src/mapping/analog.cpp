#include "xbar/mapping/analog.hpp"

#include <algorithm>

#include "xbar/common/error.hpp"

namespace xbar::mapping {

MappedLayer map_layer(const nn::Layer& layer, std::size_t layer_index, const nn::Shape& input_shape,
                      const QuantConfig& qc, std::size_t tile_rows, std::size_t tile_cols,
                      const circuit::DeviceModel& device) {
  qc.validate(device.levels);
  MappedLayer m;
  m.layer_index = layer_index;
  m.kind = layer.kind();
  const nn::Tensor* w = nullptr;
  const nn::Tensor* b = nullptr;
  if (const auto* lin = dynamic_cast<const nn::Linear*>(&layer)) {
    lin->output_shape(input_shape);
    m.fan_in = lin->in_features();
    m.out = lin->out_features();
    w = &lin->weight();
    b = &lin->bias();
  } else if (const auto* conv = dynamic_cast<const nn::Conv2d*>(&layer)) {
    m.conv = conv->geometry(input_shape);
    m.fan_in = m.conv->patch_size();
    m.out = conv->out_channels();
    w = &conv->weight();
    b = &conv->bias();
  } else {
    throw ShapeError("only linear and conv2d layers map onto crossbars");
  }
  // W is [out, fan_in]; the crossbar holds W^T.
  std::vector<double> wt(m.fan_in * m.out);
  for (std::size_t o = 0; o < m.out; ++o)
    for (std::size_t i = 0; i < m.fan_in; ++i) wt[i * m.out + o] = (*w)[o * m.fan_in + i];
  m.weights = quantize_layer(wt, qc);
  m.digits = slice_weights(m.weights.values, m.fan_in, m.out, qc);
  m.grid = map_matrix_to_tiles(m.digits, tile_rows, tile_cols, device, qc);
  m.bias = b->to_vector();
  return m;
}

AnalogLayer::AnalogLayer(MappedLayer mapped, const ExecBackend& backend, const QuantConfig& qc, ExecOptions options)
    : m_(std::move(mapped)), qc_(qc) {
  if (auto t = backend.required_tile(); t && (t->first != m_.grid.tile_rows || t->second != m_.grid.tile_cols))
    throw ShapeError("layer was tiled for " + std::to_string(m_.grid.tile_rows) + "x" +
                     std::to_string(m_.grid.tile_cols) + " crossbars but the backend models " +
                     std::to_string(t->first) + "x" + std::to_string(t->second));
  bool all_linear = true;
  for (const auto& tile : m_.grid.tiles) {
    std::vector<std::unique_ptr<BoundTile>> p, n;
    for (std::size_t s = 0; s < tile.pos.size(); ++s) {
      p.push_back(backend.bind(tile.pos[s], qc_));
      n.push_back(backend.bind(tile.neg[s], qc_));
      all_linear = all_linear && p.back()->effective() && n.back()->effective();
    }
    pos_.push_back(std::move(p));
    neg_.push_back(std::move(n));
  }
  if (options.fold_linear && all_linear) {
    for (std::size_t t = 0; t < pos_.size(); ++t) {
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<long>(m_.grid.tile_rows), static_cast<long>(m_.grid.tile_cols));
      for (std::size_t s = 0; s < pos_[t].size(); ++s)
        e += static_cast<double>(m_.digits.place_value(static_cast<int>(s), qc_)) *
             (*pos_[t][s]->effective() - *neg_[t][s]->effective());
      folded_.push_back(std::move(e));
    }
  }
}

RowMatrix AnalogLayer::integer_mvm(const RowMatrix& x_int) const {
  if (static_cast<std::size_t>(x_int.cols()) != m_.fan_in)
    throw ShapeError("layer expects " + std::to_string(m_.fan_in) + " inputs per row");
  const long P = x_int.rows();
  const auto& g = m_.grid;
  const long R = static_cast<long>(g.tile_rows), C = static_cast<long>(g.tile_cols);
  RowMatrix out = RowMatrix::Zero(P, static_cast<long>(m_.out));
  const int streams = qc_.streams();
  const double stream_radix = static_cast<double>(1 << qc_.stream_bits);
  const long smask = qc_.max_stream_digit();

  for (std::size_t gr = 0; gr < g.grid_rows; ++gr) {
    const long r0 = static_cast<long>(gr) * R;
    const long rn = std::min<long>(R, static_cast<long>(m_.fan_in) - r0);
    RowMatrix block = RowMatrix::Zero(P, R);  // zero-padded input rows
    block.leftCols(rn) = x_int.middleCols(r0, rn);
    std::vector<RowMatrix> streams_of_block;
    if (folded_.empty()) {
      for (int t = 0; t < streams; ++t) {
        RowMatrix bt(P, R);
        for (long p = 0; p < P; ++p)
          for (long i = 0; i < R; ++i)
            bt(p, i) = static_cast<double>((static_cast<long>(block(p, i)) >> (t * qc_.stream_bits)) & smask);
        streams_of_block.push_back(std::move(bt));
      }
    }
    for (std::size_t gc = 0; gc < g.grid_cols; ++gc) {
      const std::size_t t_index = gr * g.grid_cols + gc;
      const long c0 = static_cast<long>(gc) * C;
      const long cn = std::min<long>(C, static_cast<long>(m_.out) - c0);
      RowMatrix partial;
      if (!folded_.empty()) {
        partial = block * folded_[t_index];
      } else {
        partial = RowMatrix::Zero(P, C);
        for (std::size_t s = 0; s < pos_[t_index].size(); ++s) {
          const double slice_place = static_cast<double>(m_.digits.place_value(static_cast<int>(s), qc_));
          double stream_place = 1.0;
          for (int t = 0; t < streams; ++t, stream_place *= stream_radix) {
            const auto& bt = streams_of_block[static_cast<std::size_t>(t)];
            partial += (slice_place * stream_place) *
                       (pos_[t_index][s]->digit_mvm(bt) - neg_[t_index][s]->digit_mvm(bt));
          }
        }
      }
      out.middleCols(c0, cn) += partial.leftCols(cn);
    }
  }
  return out;
}

RowMatrix AnalogLayer::rows_for(const nn::Tensor& x, std::vector<double>& scale_of_row, bool negative_part,
                                bool& any) const {
  const std::size_t N = x.batch();
  const std::size_t per = x.sample_size();
  const std::size_t L = m_.conv ? m_.conv->patches() : 1;
  RowMatrix rows(static_cast<long>(N * L), static_cast<long>(m_.fan_in));
  scale_of_row.assign(N * L, 1.0);
  any = false;
  std::vector<double> part(per);
  for (std::size_t n = 0; n < N; ++n) {
    const double* sample = x.ptr() + n * per;
    const double scale = input_scale({sample, per}, qc_);
    for (std::size_t k = 0; k < per; ++k) {
      const double v = negative_part ? -sample[k] : sample[k];
      part[k] = v > 0.0 ? v : 0.0;
      any = any || part[k] > 0.0;
    }
    RowMatrix local;
    if (m_.conv) {
      local = nn::im2col(part.data(), *m_.conv);
    } else {
      local = Eigen::Map<const RowMatrix>(part.data(), 1, static_cast<long>(per));
    }
    for (long r = 0; r < local.rows(); ++r)
      for (long c = 0; c < local.cols(); ++c)
        rows(static_cast<long>(n * L) + r, c) = quantize_input(local(r, c), scale, qc_);
    std::fill_n(scale_of_row.begin() + static_cast<long>(n * L), L, scale);
  }
  return rows;
}

nn::Tensor AnalogLayer::forward(const nn::Tensor& x) const {
  const nn::Shape in = x.sample_shape();
  if (m_.conv) {
    if (in != nn::Shape{m_.conv->channels, m_.conv->height, m_.conv->width})
      throw ShapeError("mapped conv layer got input " + nn::shape_string(x.shape()));
  } else if (in != nn::Shape{m_.fan_in}) {
    throw ShapeError("mapped linear layer got input " + nn::shape_string(x.shape()));
  }
  std::vector<double> scale;
  bool any_pos = false, any_neg = false;
  RowMatrix y = integer_mvm(rows_for(x, scale, false, any_pos));
  const RowMatrix neg_rows = rows_for(x, scale, true, any_neg);
  if (any_neg) y -= integer_mvm(neg_rows);

  const std::size_t N = x.batch();
  const std::size_t L = m_.conv ? m_.conv->patches() : 1;
  nn::Tensor out = m_.conv ? nn::Tensor({N, m_.out, m_.conv->out_height(), m_.conv->out_width()})
                           : nn::Tensor({N, m_.out});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t l = 0; l < L; ++l) {
      const long r = static_cast<long>(n * L + l);
      const double s = m_.weights.scale * scale[static_cast<std::size_t>(r)];
      for (std::size_t o = 0; o < m_.out; ++o)
        out[(n * m_.out + o) * L + l] = y(r, static_cast<long>(o)) * s + m_.bias[o];
    }
  return out;
}

// ---- network --------------------------------------------------------------

AnalogNetwork::AnalogNetwork(const nn::Network& net, std::shared_ptr<const ExecBackend> backend,
                             const QuantConfig& qc, std::pair<std::size_t, std::size_t> tile, ExecOptions options)
    : net_(net), backend_(std::move(backend)), qc_(qc) {
  if (!backend_) throw ConfigError("analog network needs a backend");
  if (auto t = backend_->required_tile()) tile = *t;
  const auto shapes = net_.activation_shapes();
  for (std::size_t k = 0; k < net_.size(); ++k) {
    const auto& l = net_.layer(k);
    if (!l.affine()) continue;
    layers_.emplace(k, AnalogLayer(map_layer(l, k, shapes[k], qc_, tile.first, tile.second, backend_->device()),
                                   *backend_, qc_, options));
  }
}

nn::Tensor AnalogNetwork::apply(std::size_t layer_index, const nn::Layer&, const nn::Tensor& x) const {
  const auto it = layers_.find(layer_index);
  if (it == layers_.end()) throw ShapeError("layer " + std::to_string(layer_index) + " is not mapped");
  return it->second.forward(x);
}

nn::Tensor AnalogNetwork::logits(const nn::Tensor& x) const {
  constexpr std::size_t kChunk = 128;
  if (x.batch() <= kChunk) return net_.forward(x, this);
  std::vector<nn::Tensor> parts;
  for (std::size_t b = 0; b < x.batch(); b += kChunk)
    parts.push_back(net_.forward(x.slice_batch(b, std::min(kChunk, x.batch() - b)), this));
  return nn::concat_batch(parts);
}

std::vector<const MappedLayer*> AnalogNetwork::mapped_layers() const {
  std::vector<const MappedLayer*> out;
  for (const auto& [k, l] : layers_) out.push_back(&l.mapped());
  return out;
}

nn::Tensor execute_layer_analog(const MappedLayer& mapped, const nn::Tensor& x, const ExecBackend& backend,
                                const QuantConfig& qc) {
  return AnalogLayer(mapped, backend, qc).forward(x);
}

nn::Tensor execute_network_analog(const nn::Network& net, const nn::Tensor& x,
                                  std::shared_ptr<const ExecBackend> backend, const QuantConfig& qc,
                                  std::pair<std::size_t, std::size_t> tile) {
  return AnalogNetwork(net, std::move(backend), qc, tile).logits(x);
}

}  // namespace xbar::mapping
