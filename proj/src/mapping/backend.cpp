#include "xbar/mapping/backend.hpp"

#include "xbar/common/error.hpp"
#include "xbar/mapping/tiles.hpp"

namespace xbar::mapping {

std::string to_string(BackendKind k) {
  switch (k) {
    case BackendKind::IdealDigital: return "ideal-digital";
    case BackendKind::CircuitNonIdeal: return "circuit";
    case BackendKind::Surrogate: return "surrogate";
  }
  return "unknown";
}

namespace {

class MatrixTile final : public BoundTile {
 public:
  explicit MatrixTile(Eigen::MatrixXd e) : e_(std::move(e)) {}
  RowMatrix digit_mvm(const RowMatrix& b) const override {
    if (b.cols() != e_.rows()) throw ShapeError("stream digit width does not match the tile");
    return b * e_;
  }
  const Eigen::MatrixXd* effective() const override { return &e_; }

 private:
  Eigen::MatrixXd e_;
};

// Exponential devices: two mesh solves (programmed and baseline) per vector.
class NonlinearCircuitTile final : public BoundTile {
 public:
  NonlinearCircuitTile(const circuit::CrossbarModel& m, circuit::SolverOptions opt, circuit::ConductanceMatrix g,
                       double v_step, double unit)
      : solver_(m.geometry, m.device, opt), base_solver_(m.geometry, m.device, opt), g_(std::move(g)),
        base_(baseline_matrix(g_.rows(), g_.cols(), m.device)), v_step_(v_step), unit_(unit) {}

  RowMatrix digit_mvm(const RowMatrix& b) const override {
    if (static_cast<std::size_t>(b.cols()) != g_.rows()) throw ShapeError("stream digit width does not match the tile");
    RowMatrix out(b.rows(), static_cast<long>(g_.cols()));
    std::vector<double> v(g_.rows());
    for (long p = 0; p < b.rows(); ++p) {
      bool any = false;
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = b(p, static_cast<long>(i)) * v_step_;
        any = any || v[i] != 0.0;
      }
      if (!any) {
        out.row(p).setZero();
        continue;
      }
      const auto s = solver_.solve(v, g_);
      const auto s0 = base_solver_.solve(v, base_);
      for (std::size_t j = 0; j < g_.cols(); ++j)
        out(p, static_cast<long>(j)) = (s.column_currents[j] - s0.column_currents[j]) / unit_;
    }
    return out;
  }

 private:
  mutable circuit::MeshSolver solver_;
  mutable circuit::MeshSolver base_solver_;
  circuit::ConductanceMatrix g_, base_;
  double v_step_, unit_;
};

class SurrogateTile final : public BoundTile {
 public:
  SurrogateTile(surrogate::SurrogateNet::Bound g, surrogate::SurrogateNet::Bound base, double v_step, double unit)
      : g_(std::move(g)), base_(std::move(base)), v_step_(v_step), unit_(unit) {}
  RowMatrix digit_mvm(const RowMatrix& b) const override {
    const RowMatrix v = b * v_step_;
    return (g_.currents(v) - base_.currents(v)) / unit_;
  }

 private:
  surrogate::SurrogateNet::Bound g_, base_;
  double v_step_, unit_;
};

double stream_voltage_step(const circuit::DeviceModel& d, const QuantConfig& qc) {
  return d.v_max / qc.max_stream_digit();
}

}  // namespace

std::unique_ptr<BoundTile> IdealDigitalBackend::bind(const circuit::ConductanceMatrix& g,
                                                     const QuantConfig& qc) const {
  const auto digits = read_digits(g, device_, qc);
  Eigen::MatrixXd e(static_cast<long>(g.rows()), static_cast<long>(g.cols()));
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) e(static_cast<long>(i), static_cast<long>(j)) = digits[i * g.cols() + j];
  return std::make_unique<MatrixTile>(std::move(e));
}

CircuitBackend::CircuitBackend(circuit::CrossbarModel model, circuit::SolverOptions options)
    : model_(std::move(model)), options_(options) {
  model_.geometry.validate();
  model_.device.validate();
  if (model_.device.is_linear()) {
    circuit::MeshSolver solver(model_.geometry, model_.device, options_);
    baseline_transfer_ = solver.transfer(baseline_matrix(model_.geometry.rows, model_.geometry.cols, model_.device));
  }
}

std::unique_ptr<BoundTile> CircuitBackend::bind(const circuit::ConductanceMatrix& g, const QuantConfig& qc) const {
  if (g.rows() != model_.geometry.rows || g.cols() != model_.geometry.cols)
    throw ShapeError("tile is " + std::to_string(g.rows()) + "x" + std::to_string(g.cols()) + " but backend models " +
                     std::to_string(model_.geometry.rows) + "x" + std::to_string(model_.geometry.cols));
  const double v_step = stream_voltage_step(model_.device, qc);
  const double g_step = digit_step(model_.device, qc);
  if (model_.device.is_linear()) {
    circuit::MeshSolver solver(model_.geometry, model_.device, options_);
    // currents = (b * v_step) * T, so digits = b * (T - T_base) / g_step.
    Eigen::MatrixXd e = (solver.transfer(g) - baseline_transfer_) / g_step;
    return std::make_unique<MatrixTile>(std::move(e));
  }
  return std::make_unique<NonlinearCircuitTile>(model_, options_, g, v_step, v_step * g_step);
}

SurrogateBackend::SurrogateBackend(std::shared_ptr<const surrogate::SurrogateNet> net, std::string name)
    : net_(std::move(net)), name_(std::move(name)) {
  if (!net_) throw ConfigError("surrogate backend needs a trained surrogate");
  if (name_.empty()) name_ = net_->geometry_id().empty() ? "surrogate" : "surrogate:" + net_->geometry_id();
}

std::unique_ptr<BoundTile> SurrogateBackend::bind(const circuit::ConductanceMatrix& g, const QuantConfig& qc) const {
  const auto& d = net_->device();
  const double v_step = stream_voltage_step(d, qc);
  const double unit = v_step * digit_step(d, qc);
  return std::make_unique<SurrogateTile>(net_->bind(g), net_->bind(baseline_matrix(g.rows(), g.cols(), d)), v_step,
                                         unit);
}

}  // namespace xbar::mapping
