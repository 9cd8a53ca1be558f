#include "xbar/surrogate/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xbar/common/container.hpp"
#include "xbar/common/error.hpp"
#include "xbar/common/rng.hpp"
#include "xbar/nn/checkpoint.hpp"
#include "xbar/nn/loss.hpp"
#include "xbar/nn/train.hpp"

namespace xbar::surrogate {

using nn::RowMatrix;
using nn::Tensor;

SurrogateNet::SurrogateNet(const circuit::CrossbarGeometry& geometry, const circuit::DeviceModel& device,
                           std::size_t hidden_dim, std::string geometry_id)
    : geometry_(geometry), device_(device), geometry_id_(std::move(geometry_id)), hidden_(hidden_dim),
      norm_(Normalization::for_tile(geometry, device)), mlp_({geometry.rows + geometry.rows * geometry.cols}) {
  if (hidden_dim == 0) throw RangeError("surrogate hidden_dim must be positive");
  geometry.validate();
  device.validate();
  mlp_.emplace<nn::Linear>(input_dim(), hidden_).emplace<nn::Relu>().emplace<nn::Linear>(hidden_, output_dim());
}

void SurrogateNet::check_tile(std::size_t rows, std::size_t cols) const {
  if (rows != geometry_.rows || cols != geometry_.cols)
    throw ShapeError("surrogate models a " + std::to_string(geometry_.rows) + "x" + std::to_string(geometry_.cols) +
                     " tile, got " + std::to_string(rows) + "x" + std::to_string(cols));
}

Tensor SurrogateNet::features(const RowMatrix& v, const RowMatrix& g) const {
  const std::size_t R = geometry_.rows, RC = R * geometry_.cols;
  if (static_cast<std::size_t>(v.cols()) != R || static_cast<std::size_t>(g.cols()) != RC || v.rows() != g.rows())
    throw ShapeError("surrogate inputs do not match the modelled tile");
  const auto n = static_cast<std::size_t>(v.rows());
  Tensor x({n, R + RC});
  auto X = x.matrix();
  X.leftCols(static_cast<long>(R)) = v / norm_.v_scale;
  X.rightCols(static_cast<long>(RC)) = g * norm_.g_scale;
  return x;
}

Tensor SurrogateNet::ideal_normalized(const RowMatrix& v, const RowMatrix& g) const {
  const std::size_t R = geometry_.rows, C = geometry_.cols;
  const auto n = static_cast<std::size_t>(v.rows());
  Tensor out({n, C});
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::Map<const RowMatrix> G(g.row(static_cast<long>(k)).data(), static_cast<long>(R), static_cast<long>(C));
    out.matrix().row(static_cast<long>(k)) = (v.row(static_cast<long>(k)) * G) / norm_.i_scale;
  }
  return out;
}

RowMatrix SurrogateNet::predict_batch(const RowMatrix& v, const RowMatrix& g) const {
  const Tensor h = mlp_.forward(features(v, g));
  const Tensor ideal = ideal_normalized(v, g);
  RowMatrix out = ideal.matrix().array() * (1.0 - h.matrix().array()) * norm_.i_scale;
  return out;
}

std::vector<double> SurrogateNet::predict(std::span<const double> v, const circuit::ConductanceMatrix& g) const {
  check_tile(g.rows(), g.cols());
  if (v.size() != geometry_.rows) throw ShapeError("surrogate voltage vector has the wrong length");
  RowMatrix vm = Eigen::Map<const RowMatrix>(v.data(), 1, static_cast<long>(v.size()));
  RowMatrix gm = Eigen::Map<const RowMatrix>(g.values().data(), 1, static_cast<long>(g.values().size()));
  const RowMatrix out = predict_batch(vm, gm);
  return {out.data(), out.data() + out.size()};
}

SurrogateNet::Bound SurrogateNet::bind(const circuit::ConductanceMatrix& g) const {
  check_tile(g.rows(), g.cols());
  const long R = static_cast<long>(geometry_.rows), C = static_cast<long>(geometry_.cols);
  const long H = static_cast<long>(hidden_);
  const auto& l1 = dynamic_cast<const nn::Linear&>(mlp_.layer(0));
  const auto& l2 = dynamic_cast<const nn::Linear&>(mlp_.layer(2));
  Eigen::Map<const RowMatrix> W1(l1.weight().ptr(), H, R + R * C);
  Eigen::Map<const RowMatrix> W2(l2.weight().ptr(), C, H);
  // Owned copy: keeps the product independent of where g's buffer sits.
  const Eigen::VectorXd gvec = Eigen::Map<const Eigen::VectorXd>(g.values().data(), R * C);
  Bound b;
  b.g_ = Eigen::Map<const RowMatrix>(g.values().data(), R, C);
  b.w1v_ = W1.leftCols(R);
  b.bias1_ = (W1.rightCols(R * C) * (gvec * norm_.g_scale)).transpose() +
             Eigen::Map<const Eigen::RowVectorXd>(l1.bias().ptr(), H);
  b.w2_ = W2;
  b.bias2_ = Eigen::Map<const Eigen::RowVectorXd>(l2.bias().ptr(), C);
  b.v_scale_ = norm_.v_scale;
  return b;
}

RowMatrix SurrogateNet::Bound::currents(const RowMatrix& v) const {
  if (v.cols() != g_.rows()) throw ShapeError("bound surrogate voltage batch has the wrong width");
  Eigen::MatrixXd hidden = (v / v_scale_) * w1v_.transpose();
  hidden.rowwise() += bias1_;
  hidden = hidden.cwiseMax(0.0);
  Eigen::MatrixXd h = hidden * w2_.transpose();
  h.rowwise() += bias2_;
  const Eigen::MatrixXd ideal = v * g_;
  return (ideal.array() * (1.0 - h.array())).matrix();
}

// ---- training -------------------------------------------------------------

namespace {

RowMatrix rows_of(const RowMatrix& m, std::span<const std::size_t> idx) {
  RowMatrix out(static_cast<long>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<long>(k)) = m.row(static_cast<long>(idx[k]));
  return out;
}

}  // namespace

SurrogateNet train_surrogate(const CircuitDataset& data, const SurrogateTrainOptions& options,
                             const SurrogateEpochCallback& on_epoch) {
  if (data.size() == 0 || data.train_count == 0) throw RangeError("surrogate training set is empty");
  if (options.epochs < 0) throw RangeError("epochs must be non-negative");
  if (options.batch == 0) throw RangeError("batch size must be positive");
  if (!(options.lr > 0.0)) throw RangeError("learning rate must be positive");
  SurrogateNet net(data.geometry, data.device, options.hidden_dim, options.geometry_id);
  net.mlp().init(options.seed);
  // Start from the ideal product: zero correction.
  auto& head = dynamic_cast<nn::Linear&>(net.mlp().layer(2));
  for (auto& w : head.weight().data()) w = 0.0;

  const double i_scale = net.normalization().i_scale;
  std::vector<std::size_t> order(data.train_count);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(options.seed, 1000003u + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += options.batch) {
      const std::size_t n = std::min(options.batch, order.size() - b);
      const std::span<const std::size_t> idx(order.data() + b, n);
      const RowMatrix v = rows_of(data.v, idx), g = rows_of(data.g, idx);
      Tensor target({n, data.geometry.cols});
      target.matrix() = rows_of(data.current, idx) / i_scale;
      const Tensor ideal = net.ideal_normalized(v, g);
      const nn::Trace trace = net.mlp().forward_trace(net.features(v, g));
      Tensor pred(ideal.shape());
      pred.matrix() = ideal.matrix().array() * (1.0 - trace.output().matrix().array());
      auto loss = nn::mse(pred, target);
      if (!std::isfinite(loss.loss)) throw TrainingError("surrogate loss became non-finite", epoch);
      Tensor grad_h(ideal.shape());
      grad_h.matrix() = -(ideal.matrix().array() * loss.grad.matrix().array());
      nn::ParamGrads grads = net.mlp().zero_param_grads();
      net.mlp().backward(trace, grad_h, &grads);
      nn::sgd_step(net.mlp(), grads, options.lr);
      loss_sum += loss.loss * static_cast<double>(n);
    }
    auto& st = net.stats();
    st.epochs = epoch + 1;
    st.loss.push_back(loss_sum / static_cast<double>(order.size()));
    if (on_epoch) {
      st.validation_error = validation_error(net, data);
      on_epoch(epoch, st);
    }
  }
  auto& st = net.stats();
  st.train_error = mean_relative_error(net, data, 0, data.train_count);
  st.validation_error = validation_error(net, data);
  return net;
}

double mean_relative_error(const SurrogateNet& net, const CircuitDataset& data, std::size_t begin,
                           std::size_t end) {
  if (begin >= end || end > data.size()) throw RangeError("empty or out-of-range evaluation rows");
  const std::size_t n = end - begin;
  const RowMatrix truth = data.current.middleRows(static_cast<long>(begin), static_cast<long>(n));
  const double cutoff = 1e-3 * truth.cwiseAbs().maxCoeff();
  double sum = 0.0;
  std::size_t count = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t b = 0; b < n; b += kChunk) {
    const long m = static_cast<long>(std::min(kChunk, n - b));
    const long r0 = static_cast<long>(begin + b);
    const RowMatrix pred = net.predict_batch(data.v.middleRows(r0, m), data.g.middleRows(r0, m));
    for (long i = 0; i < m; ++i)
      for (long j = 0; j < pred.cols(); ++j) {
        const double t = data.current(r0 + i, j);
        if (std::abs(t) <= cutoff) continue;
        sum += std::abs(pred(i, j) - t) / std::abs(t);
        ++count;
      }
  }
  if (count == 0) throw RangeError("no current above the relative-error cutoff");
  return sum / static_cast<double>(count);
}

double validation_error(const SurrogateNet& net, const CircuitDataset& data) {
  // Without a held-out split the training rows are the only reference.
  if (data.validation_count() == 0) return mean_relative_error(net, data, 0, data.size());
  return mean_relative_error(net, data, data.train_count, data.size());
}

// ---- checkpoint -----------------------------------------------------------

void save_surrogate(const std::filesystem::path& path, const SurrogateNet& net) {
  nlohmann::json meta;
  const auto& g = net.geometry();
  const auto& d = net.device();
  meta["geometry_id"] = net.geometry_id();
  meta["geometry"] = {{"rows", g.rows}, {"cols", g.cols}, {"r_source", g.r_source}, {"r_sink", g.r_sink},
                      {"r_wire", g.r_wire}};
  meta["device"] = {{"r_on", d.r_on},
                    {"r_off", d.r_off},
                    {"levels", d.levels},
                    {"v_max", d.v_max},
                    {"nonlinearity", std::string(circuit::to_string(d.nonlinearity.kind))},
                    {"beta", d.nonlinearity.beta}};
  meta["dims"] = {{"input", net.input_dim()}, {"hidden", net.hidden_dim()}, {"output", net.output_dim()}};
  const auto& n = net.normalization();
  meta["normalization"] = {{"v_scale", n.v_scale}, {"g_scale", n.g_scale}, {"i_scale", n.i_scale}};
  const auto& s = net.stats();
  meta["train_stats"] = {{"epochs", s.epochs},
                         {"train_error", s.train_error},
                         {"validation_error", s.validation_error},
                         {"loss", s.loss}};
  Container c = nn::network_to_container(net.mlp(), meta);
  c.kind = "surrogate";
  write_container(path, c);
}

SurrogateNet load_surrogate(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.kind != "surrogate") throw FormatError(path.string() + " is not a surrogate checkpoint");
  try {
    const auto& m = c.meta;
    circuit::CrossbarGeometry g;
    g.rows = m.at("geometry").at("rows").get<std::size_t>();
    g.cols = m.at("geometry").at("cols").get<std::size_t>();
    g.r_source = m.at("geometry").at("r_source").get<double>();
    g.r_sink = m.at("geometry").at("r_sink").get<double>();
    g.r_wire = m.at("geometry").at("r_wire").get<double>();
    circuit::DeviceModel d;
    d.r_on = m.at("device").at("r_on").get<double>();
    d.r_off = m.at("device").at("r_off").get<double>();
    d.levels = m.at("device").at("levels").get<int>();
    d.v_max = m.at("device").at("v_max").get<double>();
    d.nonlinearity.kind = circuit::parse_nonlinearity(m.at("device").at("nonlinearity").get<std::string>());
    d.nonlinearity.beta = m.at("device").at("beta").get<double>();
    SurrogateNet net(g, d, m.at("dims").at("hidden").get<std::size_t>(), m.at("geometry_id").get<std::string>());
    c.kind = "network";
    nn::Network mlp = nn::network_from_container(c);
    if (mlp.describe() != net.mlp().describe()) throw FormatError("surrogate architecture does not match its dims");
    net.mlp() = std::move(mlp);
    auto& s = net.stats();
    s.epochs = m.at("train_stats").at("epochs").get<int>();
    s.train_error = m.at("train_stats").at("train_error").get<double>();
    s.validation_error = m.at("train_stats").at("validation_error").get<double>();
    s.loss = m.at("train_stats").at("loss").get<std::vector<double>>();
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad surrogate checkpoint: ") + e.what());
  }
}

}  // namespace xbar::surrogate
