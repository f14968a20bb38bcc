#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stlcvx/formula.hpp"
#include "stlcvx/trajectory.hpp"

namespace stlcvx {

// Exact (non-smoothed) robust semantics over discrete trajectories. This is
// the ground-truth model checker used inside the optimization loop and by
// the equivalence tests; it never touches the smoothed surrogates.
//
// Each operator node carries a time-indexed margin trace:
//   predicate        rho_k
//   and / or         pointwise min / max of the operand traces
//   always/eventually with interest Before: extremum of the child trace over
//                    [k_a, clamp(k)]; with interest After the window is
//                    reflected to [clamp(k), k_b], where clamp(k) projects k
//                    into the window. The root margin aggregates the child
//                    trace over the whole resolved window; satisfaction is
//                    strict positivity of the root margin.

// Margin of a single predicate at step k (1-based); negation handled by the
// caller via sign flip.
double predicate_margin(const PredicateSpec& p, const Trajectory& traj, int k);

struct NodeTrace {
    std::string label;
    Eigen::VectorXd values;  // length N
};

struct ExactEvaluation {
    double root_margin = 0.0;
    std::vector<NodeTrace> nodes;  // operator nodes in evaluation (post) order, root last
};

ExactEvaluation eval_exact(const Formula& core, const Trajectory& traj);

// Strict sign of the root margin (margin == 0 is unsatisfied).
bool eval_boolean(const Formula& core, const Trajectory& traj);

}  // namespace stlcvx
