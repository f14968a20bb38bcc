#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stlcvx/formula.hpp"
#include "stlcvx/plant.hpp"
#include "stlcvx/qp.hpp"
#include "stlcvx/trajectory.hpp"

namespace stlcvx {

// Modified successive convexification driver: linearize the STL blocks about
// the reference, solve the convex subproblem (fuel surrogate + weighted STL
// terminal variable, dynamics/boundary equalities, thrust cones, trust
// regions), repropagate, model-check the repropagated trajectory with the
// exact semantics, then manage the trust region and the STL cost weight.

struct ScvxConfig {
    double trust_radius_init = 500.0;  // m
    double dilate_factor = 2.0;
    double shrink_factor = 0.8;
    double trust_radius_floor = 1.0;   // m
    double trust_radius_ceil = 1e5;    // m
    double eps_converge = 5.0;         // m
    double w_omega_init = -1e-3;
    double w_omega_grow = 3.0;
    double w_omega_relax = 0.5;
    double kappa = 0.0;
    int max_outer_iter = 60;
    double accuracy_factor = 10.0;  // accurate iff reprop gap <= factor * eps_converge
    bool nonlinear_reprop = false;
    int reprop_substeps = 10;
    double qp_tol = 1e-6;
    int qp_max_iter = 20000;

    void validate() const;
};

struct ScvxIterationRecord {
    int iter = 0;
    std::string subproblem_status;
    bool accepted = false;
    bool satisfied = false;
    double cost_jstl = 0.0;     // subproblem objective
    double energy = 0.0;        // fuel surrogate term, m/s
    double delta_v = 0.0;       // of the repropagated trajectory, m/s
    double root_margin = 0.0;   // exact-oracle margin of the repropagated trajectory
    double eps_c = 0.0;         // max per-step position move vs the reference, m
    double trust_radius = 0.0;  // m
    double w_omega = 0.0;
};

struct ScvxTrace {
    std::vector<ScvxIterationRecord> iterations;
    bool converged = false;
    bool satisfied = false;
    std::string termination;

    void write_csv(std::ostream& out) const;
};

struct ScvxProblem {
    FormulaPtr formula;  // parsed; desugared and validated inside run
    PlantParams plant;
    Eigen::Matrix<double, 6, 1> x_initial = Eigen::Matrix<double, 6, 1>::Zero();
    Eigen::Matrix<double, 6, 1> x_final = Eigen::Matrix<double, 6, 1>::Zero();
    ScvxConfig config;
};

// Weight schedule for the STL terminal variable: press the weight more
// negative until a first satisfying trajectory appears, relax it toward zero
// while satisfaction holds, press again on relapse. Always nonpositive.
double update_stl_weight(double w_omega, bool satisfied_now, bool ever_satisfied,
                         const ScvxConfig& cfg);

// Dilate while the subproblem is infeasible or the constraint unsatisfied,
// shrink once satisfied; clamped to [floor, ceil].
Eigen::VectorXd update_trust_region(Eigen::VectorXd radii, bool satisfied_now,
                                    const ScvxConfig& cfg);

// Called with (iteration, repropagated trajectory); iteration 0 is the free
// drift initialization.
using IterationCallback = std::function<void(int, const Trajectory&)>;

std::pair<Trajectory, ScvxTrace> run_scvx(const ScvxProblem& problem,
                                          const IterationCallback& on_iterate = {});

}  // namespace stlcvx
