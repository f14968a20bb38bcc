#pragma once

#include <Eigen/Dense>

#include "stlcvx/trajectory.hpp"

namespace stlcvx {

// Relative-orbit dynamics for the rendezvous problems: Clohessy-Wiltshire
// motion about a circular reference orbit, discretized exactly under a
// zero-order hold. State is [r; v] in the local orbital frame (x radial,
// y along-track, z cross-track); control is thrust in newtons, entering the
// dynamics as thrust/mass.

struct PlantParams {
    double mass_kg = 1000.0;
    double mean_motion_rad_s = 2.0 * 3.14159265358979323846 / 86164.0;  // geostationary
    double dt_s = 50.0;
    int n_steps = 101;
    double max_thrust_n = 1.0;

    double horizon_s() const { return dt_s * (n_steps - 1); }
    void validate() const;
};

struct DiscreteModel {
    Eigen::Matrix<double, 6, 6> a_d;
    Eigen::Matrix<double, 6, 3> b_d;
};

// Continuous-time CW system matrix for the given mean motion.
Eigen::Matrix<double, 6, 6> cw_system_matrix(double mean_motion);

// Exact ZOH discretization (augmented-matrix exponential).
DiscreteModel cw_discretize(const PlantParams& params);

// Roll the discrete linear model forward from x1 under the given controls
// (kControlDim x n_steps; the final column does not drive the dynamics).
Trajectory repropagate_linear(const DiscreteModel& model, const PlantParams& params,
                              const Eigen::Matrix<double, 6, 1>& x1,
                              const Eigen::MatrixXd& controls);

// RK4 integration of the full two-body relative motion (target circular,
// chaser perturbed), fixed substeps per grid interval.
Trajectory repropagate_nonlinear(const PlantParams& params, const Eigen::Matrix<double, 6, 1>& x1,
                                 const Eigen::MatrixXd& controls, int substeps = 10);

// Sum_k ||F_k|| / mass * dt, in m/s.
double delta_v(const Trajectory& traj, double mass_kg);

}  // namespace stlcvx
