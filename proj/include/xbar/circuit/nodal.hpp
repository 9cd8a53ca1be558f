#pragma once

// Resistive-mesh nodal analysis of one crossbar tile.
//
// Unknowns are the 2*R*C cross-point node voltages: the source-line node
// s(i,j) = 2*(i*C + j) and the bit-line node b(i,j) = s(i,j) + 1. Stamps:
//   device g(i,j)         between s(i,j) and b(i,j)
//   r_wire                between s(i,j)-s(i,j+1) and b(i,j)-b(i+1,j)
//   r_source              from a driver held at v[i] into s(i,0)
//   r_sink                from b(R-1,j) to ground
// Zero resistances merge their endpoints into one node class; classes holding
// a driver or ground are fixed and drop out of the unknown set. Infinite
// resistances are open circuits.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <span>
#include <vector>

#include "xbar/circuit/crossbar.hpp"

namespace xbar::circuit {

struct SolverOptions {
  double linear_tolerance = 1e-10;   // relative residual of each linear solve
  double voltage_tolerance = 1e-8;   // V, nonlinear fixed-point stop criterion
  int max_iterations = 100;
};

/// Linear system A x = rhs over the unknown node classes.
struct NodalSystem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
  /// Per cross-point node (2*R*C): unknown index, or -1 when the node is tied
  /// to a driver or ground.
  std::vector<int> unknown_of_node;
  /// Per cross-point node: voltage when fixed, NaN otherwise.
  std::vector<double> fixed_voltage;
};

struct NodalSolution {
  std::vector<double> column_currents;   // A, current delivered to ground per column
  std::vector<double> node_voltages;     // V, all 2*R*C cross-point nodes
  std::vector<double> driver_currents;   // A, current leaving each driver
  int iterations = 0;
  double residual = 0.0;
};

/// Reusable solver for one geometry. The topology, sparsity pattern and
/// symbolic factorization are built once; `load` refactors numerically for a
/// new set of device stamp conductances. Not safe for concurrent use; give each
/// thread its own instance.
class MeshSolver {
 public:
  MeshSolver(const CrossbarGeometry& geometry, const DeviceModel& device,
             SolverOptions options = {});

  const CrossbarGeometry& geometry() const { return geometry_; }
  const DeviceModel& device() const { return device_; }
  std::size_t unknown_count() const { return static_cast<std::size_t>(unknowns_); }

  /// Assembles the system for `v` with devices stamped at `stamp` (row-major,
  /// R*C conductances).
  NodalSystem assemble(std::span<const double> v, std::span<const double> stamp);

  /// Full non-ideal solve. Linear devices take one linear solve; exponential
  /// devices iterate G(V_device) to a fixed point.
  NodalSolution solve(std::span<const double> v, const ConductanceMatrix& g);

  /// Linear devices only: T (R x C) such that column currents = T^T v for
  /// every v. One factorization plus R back-substitutions.
  Eigen::MatrixXd transfer(const ConductanceMatrix& g);

 private:
  enum class EdgeKind { Device, Resistor };
  struct Edge {
    int a;           // node ids in the extended node set
    int b;
    EdgeKind kind;
    double conductance;  // resistors only; devices read the stamp array
    int device;          // row-major device index for device edges
    // Offsets into the CSC value array, -1 when the entry does not exist.
    int aa = -1, bb = -1, ab = -1, ba = -1;
  };

  int driver_node(std::size_t i) const;
  int ground_node() const;
  int node_class(int node) const { return class_of_[node]; }

  void check_shapes(std::span<const double> v, const ConductanceMatrix& g) const;
  void load(std::span<const double> stamp);
  void build_rhs(std::span<const double> v, std::span<const double> stamp, Eigen::VectorXd& rhs) const;
  /// Voltages of every extended node given the unknown solution.
  std::vector<double> expand(const Eigen::VectorXd& x, std::span<const double> v) const;
  double edge_current(const Edge& e, const std::vector<double>& volts,
                      std::span<const double> g) const;
  NodalSolution finish(const Eigen::VectorXd& x, std::span<const double> v,
                       std::span<const double> g, int iterations, double residual) const;
  Eigen::VectorXd solve_loaded(const Eigen::VectorXd& rhs, double& residual) const;

  CrossbarGeometry geometry_;
  DeviceModel device_;
  SolverOptions options_;
  std::size_t internal_nodes_ = 0;
  std::vector<int> class_of_;         // extended node -> class representative
  std::vector<int> unknown_of_class_; // class representative -> unknown index or -1
  std::vector<int> driver_of_class_;  // class representative -> driver row, -1, or -2 (ground)
  int unknowns_ = 0;
  std::vector<Edge> edges_;
  Eigen::SparseMatrix<double> matrix_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
  bool analyzed_ = false;
};

/// Builds the nodal system for `v` with the devices stamped at g (linear) or at
/// G(V) evaluated for the no-drop device voltage v[i] (exponential devices).
NodalSystem build_nodal_system(std::span<const double> v, const ConductanceMatrix& g,
                               const CrossbarGeometry& geometry, const DeviceModel& device);

NodalSolution solve_nonideal(std::span<const double> v, const ConductanceMatrix& g,
                             const CrossbarGeometry& geometry, const DeviceModel& device,
                             SolverOptions options = {});

}  // namespace xbar::circuit
