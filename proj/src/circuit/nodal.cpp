#include "xbar/circuit/nodal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "xbar/common/error.hpp"

namespace xbar::circuit {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

constexpr int kGroundTag = -2;

int csc_offset(const Eigen::SparseMatrix<double>& m, int row, int col) {
  const int* outer = m.outerIndexPtr();
  const int* inner = m.innerIndexPtr();
  const int* first = inner + outer[col];
  const int* last = inner + outer[col + 1];
  const int* it = std::lower_bound(first, last, row);
  return (it != last && *it == row) ? static_cast<int>(it - inner) : -1;
}

}  // namespace

MeshSolver::MeshSolver(const CrossbarGeometry& geometry, const DeviceModel& device,
                       SolverOptions options)
    : geometry_(geometry), device_(device), options_(options) {
  geometry_.validate();
  device_.validate();
  const std::size_t R = geometry_.rows;
  const std::size_t C = geometry_.cols;
  internal_nodes_ = 2 * R * C;
  const std::size_t total = internal_nodes_ + R + 1;
  auto s = [C](std::size_t i, std::size_t j) { return static_cast<int>(2 * (i * C + j)); };
  auto b = [C](std::size_t i, std::size_t j) { return static_cast<int>(2 * (i * C + j) + 1); };

  DisjointSets sets(total);
  std::vector<Edge> raw;
  auto add_resistor = [&](int a, int c, double r) {
    if (r == 0.0) {
      sets.unite(a, c);
    } else if (std::isfinite(r)) {
      raw.push_back({a, c, EdgeKind::Resistor, 1.0 / r, -1});
    }
  };
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      raw.push_back({s(i, j), b(i, j), EdgeKind::Device, 0.0, static_cast<int>(i * C + j)});
      if (j + 1 < C) add_resistor(s(i, j), s(i, j + 1), geometry_.r_wire);
      if (i + 1 < R) add_resistor(b(i, j), b(i + 1, j), geometry_.r_wire);
    }
    add_resistor(driver_node(i), s(i, 0), geometry_.r_source);
  }
  for (std::size_t j = 0; j < C; ++j) add_resistor(b(R - 1, j), ground_node(), geometry_.r_sink);

  class_of_.resize(total);
  for (std::size_t n = 0; n < total; ++n) class_of_[n] = sets.find(static_cast<int>(n));
  driver_of_class_.assign(total, -1);
  for (std::size_t i = 0; i < R; ++i) driver_of_class_[class_of_[driver_node(i)]] = static_cast<int>(i);
  driver_of_class_[class_of_[ground_node()]] = kGroundTag;

  unknown_of_class_.assign(total, -1);
  for (std::size_t n = 0; n < internal_nodes_; ++n) {
    const int c = class_of_[n];
    if (driver_of_class_[c] == -1 && unknown_of_class_[c] == -1) unknown_of_class_[c] = unknowns_++;
  }

  for (auto& e : raw)
    if (class_of_[e.a] != class_of_[e.b]) edges_.push_back(e);

  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& e : edges_) {
    const int ua = unknown_of_class_[class_of_[e.a]];
    const int ub = unknown_of_class_[class_of_[e.b]];
    if (ua >= 0) triplets.emplace_back(ua, ua, 1.0);
    if (ub >= 0) triplets.emplace_back(ub, ub, 1.0);
    if (ua >= 0 && ub >= 0) {
      triplets.emplace_back(ua, ub, -1.0);
      triplets.emplace_back(ub, ua, -1.0);
    }
  }
  matrix_.resize(unknowns_, unknowns_);
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
  matrix_.makeCompressed();
  for (auto& e : edges_) {
    const int ua = unknown_of_class_[class_of_[e.a]];
    const int ub = unknown_of_class_[class_of_[e.b]];
    if (ua >= 0) e.aa = csc_offset(matrix_, ua, ua);
    if (ub >= 0) e.bb = csc_offset(matrix_, ub, ub);
    if (ua >= 0 && ub >= 0) {
      e.ab = csc_offset(matrix_, ua, ub);
      e.ba = csc_offset(matrix_, ub, ua);
    }
  }
}

int MeshSolver::driver_node(std::size_t i) const { return static_cast<int>(internal_nodes_ + i); }
int MeshSolver::ground_node() const { return static_cast<int>(internal_nodes_ + geometry_.rows); }

void MeshSolver::check_shapes(std::span<const double> v, const ConductanceMatrix& g) const {
  if (g.rows() != geometry_.rows || g.cols() != geometry_.cols)
    throw ShapeError("conductance matrix is " + std::to_string(g.rows()) + "x" +
                     std::to_string(g.cols()) + ", geometry is " + std::to_string(geometry_.rows) +
                     "x" + std::to_string(geometry_.cols));
  if (v.size() != geometry_.rows)
    throw ShapeError("voltage vector has " + std::to_string(v.size()) + " entries, expected " +
                     std::to_string(geometry_.rows));
}

void MeshSolver::load(std::span<const double> stamp) {
  double* values = matrix_.valuePtr();
  std::fill(values, values + matrix_.nonZeros(), 0.0);

  // Every unknown class needs a conducting path to a fixed node.
  DisjointSets reach(class_of_.size() + 1);
  const int anchor = static_cast<int>(class_of_.size());
  for (std::size_t c = 0; c < class_of_.size(); ++c)
    if (driver_of_class_[c] != -1 && class_of_[c] == static_cast<int>(c))
      reach.unite(static_cast<int>(c), anchor);

  for (const auto& e : edges_) {
    const double cond = e.kind == EdgeKind::Device ? stamp[e.device] : e.conductance;
    if (e.aa >= 0) values[e.aa] += cond;
    if (e.bb >= 0) values[e.bb] += cond;
    if (e.ab >= 0) values[e.ab] -= cond;
    if (e.ba >= 0) values[e.ba] -= cond;
    if (cond > 0.0) reach.unite(class_of_[e.a], class_of_[e.b]);
  }
  for (std::size_t n = 0; n < internal_nodes_; ++n)
    if (reach.find(class_of_[n]) != reach.find(anchor))
      throw SingularSystemError("node " + std::to_string(n) +
                                " has no conducting path to a driver or ground");

  if (unknowns_ == 0) return;
  if (!analyzed_) {
    llt_.analyzePattern(matrix_);
    analyzed_ = true;
  }
  llt_.factorize(matrix_);
  if (llt_.info() != Eigen::Success)
    throw SingularSystemError("nodal matrix is not positive definite");
}

void MeshSolver::build_rhs(std::span<const double> v, std::span<const double> stamp,
                           Eigen::VectorXd& rhs) const {
  rhs.setZero(unknowns_);
  for (const auto& e : edges_) {
    const int ca = class_of_[e.a];
    const int cb = class_of_[e.b];
    const int ua = unknown_of_class_[ca];
    const int ub = unknown_of_class_[cb];
    if ((ua >= 0) == (ub >= 0)) continue;
    const double cond = e.kind == EdgeKind::Device ? stamp[e.device] : e.conductance;
    const int fixed = ua >= 0 ? cb : ca;
    const int d = driver_of_class_[fixed];
    if (d < 0) continue;  // ground contributes nothing
    rhs[ua >= 0 ? ua : ub] += cond * v[d];
  }
}

Eigen::VectorXd MeshSolver::solve_loaded(const Eigen::VectorXd& rhs, double& residual) const {
  if (unknowns_ == 0) {
    residual = 0.0;
    return {};
  }
  Eigen::VectorXd x = llt_.solve(rhs);
  const double scale = rhs.norm();
  auto measure = [&](const Eigen::VectorXd& sol) {
    const double r = (matrix_ * sol - rhs).norm();
    return scale > 0.0 ? r / scale : r;
  };
  residual = measure(x);
  for (int refine = 0; refine < 3 && residual > options_.linear_tolerance; ++refine) {
    x += llt_.solve(rhs - matrix_ * x);
    residual = measure(x);
  }
  if (!(residual <= options_.linear_tolerance))
    throw SingularSystemError("linear solve residual " + std::to_string(residual) +
                              " exceeds tolerance (ill-conditioned mesh)");
  return x;
}

std::vector<double> MeshSolver::expand(const Eigen::VectorXd& x, std::span<const double> v) const {
  std::vector<double> volts(class_of_.size());
  for (std::size_t n = 0; n < class_of_.size(); ++n) {
    const int c = class_of_[n];
    const int u = unknown_of_class_[c];
    const int d = driver_of_class_[c];
    volts[n] = u >= 0 ? x[u] : (d >= 0 ? v[d] : 0.0);
  }
  return volts;
}

double MeshSolver::edge_current(const Edge& e, const std::vector<double>& volts,
                                std::span<const double> g) const {
  const double dv = volts[e.a] - volts[e.b];
  return e.kind == EdgeKind::Device ? device_.current(g[e.device], dv) : e.conductance * dv;
}

NodalSolution MeshSolver::finish(const Eigen::VectorXd& x, std::span<const double> v,
                                 std::span<const double> g, int iterations, double residual) const {
  const std::size_t C = geometry_.cols;
  const auto volts = expand(x, v);
  NodalSolution out;
  out.column_currents.assign(C, 0.0);
  out.driver_currents.assign(geometry_.rows, 0.0);
  out.iterations = iterations;
  out.residual = residual;
  out.node_voltages.assign(volts.begin(), volts.begin() + static_cast<long>(internal_nodes_));

  const int ground = class_of_[ground_node()];
  for (const auto& e : edges_) {
    const int ca = class_of_[e.a];
    const int cb = class_of_[e.b];
    const double flow = edge_current(e, volts, g);  // from a to b
    if ((ca == ground) != (cb == ground)) {
      // The grounded endpoint is either the ground node itself (sink edge,
      // other end is b(R-1,j)) or a bit-line node of column j.
      const int node = cb == ground ? (e.b == ground_node() ? e.a : e.b)
                                    : (e.a == ground_node() ? e.b : e.a);
      const std::size_t j = (static_cast<std::size_t>(node) / 2) % C;
      out.column_currents[j] += cb == ground ? flow : -flow;
    }
    const int da = driver_of_class_[ca];
    const int db = driver_of_class_[cb];
    if (da >= 0 && db < 0) out.driver_currents[da] += flow;
    if (db >= 0 && da < 0) out.driver_currents[db] -= flow;
  }
  return out;
}

NodalSystem MeshSolver::assemble(std::span<const double> v, std::span<const double> stamp) {
  if (v.size() != geometry_.rows || stamp.size() != geometry_.rows * geometry_.cols)
    throw ShapeError("assemble: input sizes do not match geometry");
  load(stamp);
  NodalSystem sys;
  sys.matrix = matrix_;
  build_rhs(v, stamp, sys.rhs);
  sys.unknown_of_node.resize(internal_nodes_);
  sys.fixed_voltage.resize(internal_nodes_);
  for (std::size_t n = 0; n < internal_nodes_; ++n) {
    const int c = class_of_[n];
    sys.unknown_of_node[n] = unknown_of_class_[c];
    const int d = driver_of_class_[c];
    sys.fixed_voltage[n] = unknown_of_class_[c] >= 0 ? std::numeric_limits<double>::quiet_NaN()
                                                     : (d >= 0 ? v[d] : 0.0);
  }
  return sys;
}

NodalSolution MeshSolver::solve(std::span<const double> v, const ConductanceMatrix& g) {
  check_shapes(v, g);
  for (double vi : v)
    if (!(vi >= 0.0 && vi <= device_.v_max))
      throw RangeError("input voltage " + std::to_string(vi) + " outside [0, v_max]");

  const auto gv = g.values();
  Eigen::VectorXd rhs;
  double residual = 0.0;
  if (device_.is_linear()) {
    load(gv);
    build_rhs(v, gv, rhs);
    const Eigen::VectorXd x = solve_loaded(rhs, residual);
    return finish(x, v, gv, 1, residual);
  }

  const std::size_t R = geometry_.rows;
  const std::size_t C = geometry_.cols;
  // Start from the no-drop state: source lines at v[i], bit lines at 0.
  std::vector<double> previous(internal_nodes_);
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) {
      previous[2 * (i * C + j)] = v[i];
      previous[2 * (i * C + j) + 1] = 0.0;
    }
  std::vector<double> stamp(R * C);
  std::vector<double> trace;
  for (int it = 1; it <= options_.max_iterations; ++it) {
    for (std::size_t k = 0; k < R * C; ++k)
      stamp[k] = device_.effective_conductance(gv[k], previous[2 * k] - previous[2 * k + 1]);
    load(stamp);
    build_rhs(v, stamp, rhs);
    const Eigen::VectorXd x = solve_loaded(rhs, residual);
    const auto volts = expand(x, v);
    double change = 0.0;
    for (std::size_t n = 0; n < internal_nodes_; ++n)
      change = std::max(change, std::abs(volts[n] - previous[n]));
    trace.push_back(change);
    std::copy(volts.begin(), volts.begin() + static_cast<long>(internal_nodes_), previous.begin());
    if (change <= options_.voltage_tolerance) return finish(x, v, gv, it, residual);
  }
  throw ConvergenceError("nonlinear device iteration did not converge in " +
                             std::to_string(options_.max_iterations) + " iterations",
                         std::move(trace));
}

Eigen::MatrixXd MeshSolver::transfer(const ConductanceMatrix& g) {
  if (!device_.is_linear())
    throw RangeError("transfer matrix is only defined for linear devices");
  const std::size_t R = geometry_.rows;
  const std::size_t C = geometry_.cols;
  std::vector<double> unit(R, 0.0);
  check_shapes(unit, g);
  const auto gv = g.values();
  load(gv);

  Eigen::MatrixXd rhs(unknowns_, static_cast<long>(R));
  Eigen::VectorXd col;
  for (std::size_t i = 0; i < R; ++i) {
    unit[i] = 1.0;
    build_rhs(unit, gv, col);
    rhs.col(static_cast<long>(i)) = col;
    unit[i] = 0.0;
  }
  Eigen::MatrixXd x;
  if (unknowns_ > 0) x = llt_.solve(rhs);

  Eigen::MatrixXd t(static_cast<long>(R), static_cast<long>(C));
  for (std::size_t i = 0; i < R; ++i) {
    unit[i] = 1.0;
    const Eigen::VectorXd xi = unknowns_ > 0 ? Eigen::VectorXd(x.col(static_cast<long>(i)))
                                             : Eigen::VectorXd();
    const auto sol = finish(xi, unit, gv, 1, 0.0);
    for (std::size_t j = 0; j < C; ++j) t(static_cast<long>(i), static_cast<long>(j)) = sol.column_currents[j];
    unit[i] = 0.0;
  }
  return t;
}

NodalSystem build_nodal_system(std::span<const double> v, const ConductanceMatrix& g,
                               const CrossbarGeometry& geometry, const DeviceModel& device) {
  MeshSolver solver(geometry, device);
  if (g.rows() != geometry.rows || g.cols() != geometry.cols || v.size() != geometry.rows)
    throw ShapeError("build_nodal_system: geometry inconsistent with inputs");
  std::vector<double> stamp(g.values().begin(), g.values().end());
  if (!device.is_linear())
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j)
        stamp[i * g.cols() + j] = device.effective_conductance(g(i, j), v[i]);
  return solver.assemble(v, stamp);
}

NodalSolution solve_nonideal(std::span<const double> v, const ConductanceMatrix& g,
                             const CrossbarGeometry& geometry, const DeviceModel& device,
                             SolverOptions options) {
  MeshSolver solver(geometry, device, options);
  return solver.solve(v, g);
}

}  // namespace xbar::circuit
