#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stlcvx/graph.hpp"
#include "stlcvx/trajectory.hpp"

namespace stlcvx {

// Linearization of the STL-variable recursions about a reference trajectory,
// assembled into one block-sparse equality system
//
//     A [x | alpha] = b,        plus   alpha_root at the terminal step >= 0,
//
// where x stacks the per-step [state; control] signal vectors and alpha
// stacks one length-N variable vector per graph node. Rows come in three
// flavors per Flow node (window-entry pins, in-window recursion rows,
// post-window holds; time reflected for backward nodes) and one pointwise
// row per step for Bridge nodes. Substituting a consistent reference point
// reproduces b exactly: the system is a first-order expansion about it.

// Per-evaluation probe for the smoothing arguments; used by the
// finite-difference checks to detect proximity to the min/max switches.
using SmoothingProbe = std::function<void(double a, double b)>;

// Nonlinear recursion of every node's STL variables along the reference
// trajectory (Bridge nodes pointwise, Flow nodes as held running smoothed
// extrema, reversed in time for backward nodes). Returns one length-N vector
// per node, in node order.
std::vector<Eigen::VectorXd> propagate_reference(const StlGraph& g, const Trajectory& traj,
                                                 double kappa,
                                                 const SmoothingProbe* probe = nullptr);

// Reference point for the linearization; stl_vars must be reproducible by
// propagate_reference on traj.
struct ReferencePoint {
    Trajectory traj;
    std::vector<Eigen::VectorXd> stl_vars;
};

ReferencePoint make_reference(const StlGraph& g, Trajectory traj, double kappa);

// Gradient row of a predicate margin with respect to the per-step stacked
// [state; control] vector (width kSignalWidth). Norm predicates fall back to
// a null gradient at the singular point.
Eigen::RowVectorXd predicate_jacobian(const PredicateSpec& p, const Trajectory& traj, int k);

struct LinearBlockSystem {
    Eigen::SparseMatrix<double> matrix;  // (m N) x (kSignalWidth N + m N)
    Eigen::VectorXd rhs;
    int terminal_col = -1;  // column of the root variable at its answer step; >= 0 constraint
    int n_steps = 0;
    int n_nodes = 0;

    int n_rows() const { return n_nodes * n_steps; }
    int n_cols() const { return (kSignalWidth + n_nodes) * n_steps; }
    // k is 1-based throughout.
    int x_col(int k, int j) const { return (k - 1) * kSignalWidth + j; }
    int alpha_col(int node, int k) const {
        return kSignalWidth * n_steps + node * n_steps + (k - 1);
    }
    int row_of(int node, int k) const { return node * n_steps + (k - 1); }

    // Stack a reference point into the system's column layout.
    Eigen::VectorXd stack(const ReferencePoint& ref) const;
};

LinearBlockSystem assemble(const StlGraph& g, const ReferencePoint& ref, double kappa);

// Block pattern realized by the assembled matrix: (node, column block) with
// column block -1 for x, otherwise a node id.
std::vector<std::pair<int, int>> realized_blocks(const LinearBlockSystem& sys);

// Text-based coordinate export (row col value per line) and the matching
// JSON layout descriptor, for external verification.
void write_coordinate_format(std::ostream& out, const LinearBlockSystem& sys);
nlohmann::json layout_json(const StlGraph& g, const LinearBlockSystem& sys);

}  // namespace stlcvx
