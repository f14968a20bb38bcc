#include "stlcvx/plant.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>

namespace stlcvx {

namespace {

constexpr double kEarthMu = 3.986004418e14;  // m^3/s^2

}  // namespace

void PlantParams::validate() const {
    if (!(mass_kg > 0.0) || !(mean_motion_rad_s > 0.0) || !(dt_s > 0.0) ||
        !(max_thrust_n > 0.0)) {
        throw std::invalid_argument("plant parameters must be positive");
    }
    if (n_steps < 2) throw std::invalid_argument("plant needs at least 2 grid points");
}

Eigen::Matrix<double, 6, 6> cw_system_matrix(double mean_motion) {
    const double n = mean_motion;
    Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Zero();
    a.block<3, 3>(0, 3).setIdentity();
    a(3, 0) = 3.0 * n * n;
    a(3, 4) = 2.0 * n;
    a(4, 3) = -2.0 * n;
    a(5, 2) = -n * n;
    return a;
}

DiscreteModel cw_discretize(const PlantParams& params) {
    params.validate();
    const Eigen::Matrix<double, 6, 6> a = cw_system_matrix(params.mean_motion_rad_s);
    Eigen::Matrix<double, 6, 3> b = Eigen::Matrix<double, 6, 3>::Zero();
    b.block<3, 3>(3, 0) = Eigen::Matrix3d::Identity() / params.mass_kg;

    // Exact ZOH: exp([[A, B], [0, 0]] dt) = [[A_d, B_d], [0, I]].
    Eigen::Matrix<double, 9, 9> aug = Eigen::Matrix<double, 9, 9>::Zero();
    aug.block<6, 6>(0, 0) = a * params.dt_s;
    aug.block<6, 3>(0, 6) = b * params.dt_s;
    const Eigen::Matrix<double, 9, 9> e = aug.exp();

    DiscreteModel model;
    model.a_d = e.block<6, 6>(0, 0);
    model.b_d = e.block<6, 3>(0, 6);
    return model;
}

namespace {

Trajectory make_grid(const PlantParams& params, const Eigen::MatrixXd& controls) {
    if (controls.rows() != kControlDim || controls.cols() != params.n_steps) {
        throw std::invalid_argument("controls must be 3 x n_steps");
    }
    Trajectory traj;
    traj.times.resize(params.n_steps);
    for (int k = 0; k < params.n_steps; ++k) traj.times(k) = params.dt_s * k;
    traj.states.resize(kStateDim, params.n_steps);
    traj.controls = controls;
    return traj;
}

}  // namespace

Trajectory repropagate_linear(const DiscreteModel& model, const PlantParams& params,
                              const Eigen::Matrix<double, 6, 1>& x1,
                              const Eigen::MatrixXd& controls) {
    params.validate();
    Trajectory traj = make_grid(params, controls);
    traj.states.col(0) = x1;
    for (int k = 0; k + 1 < params.n_steps; ++k) {
        traj.states.col(k + 1) = model.a_d * traj.states.col(k) + model.b_d * controls.col(k);
        if (!traj.states.col(k + 1).allFinite()) {
            throw std::runtime_error("linear repropagation diverged (non-finite state)");
        }
    }
    return traj;
}

Trajectory repropagate_nonlinear(const PlantParams& params, const Eigen::Matrix<double, 6, 1>& x1,
                                 const Eigen::MatrixXd& controls, int substeps) {
    params.validate();
    if (substeps < 1) throw std::invalid_argument("substeps must be positive");
    const double n = params.mean_motion_rad_s;
    const double orbit_radius = std::cbrt(kEarthMu / (n * n));

    // Two-body relative motion in the rotating frame centered on the target.
    auto deriv = [&](const Eigen::Matrix<double, 6, 1>& x,
                     const Eigen::Vector3d& accel) -> Eigen::Matrix<double, 6, 1> {
        const double rx = orbit_radius + x(0);
        const Eigen::Vector3d chaser(rx, x(1), x(2));
        const double r3 = std::pow(chaser.norm(), 3);
        Eigen::Matrix<double, 6, 1> dx;
        dx.head<3>() = x.tail<3>();
        dx(3) = 2.0 * n * x(4) + n * n * rx - kEarthMu * rx / r3 + accel(0);
        dx(4) = -2.0 * n * x(3) + n * n * x(1) - kEarthMu * x(1) / r3 + accel(1);
        dx(5) = -kEarthMu * x(2) / r3 + accel(2);
        return dx;
    };

    Trajectory traj = make_grid(params, controls);
    traj.states.col(0) = x1;
    const double h = params.dt_s / substeps;
    for (int k = 0; k + 1 < params.n_steps; ++k) {
        Eigen::Matrix<double, 6, 1> x = traj.states.col(k);
        const Eigen::Vector3d accel = controls.col(k) / params.mass_kg;
        for (int s = 0; s < substeps; ++s) {
            const auto k1 = deriv(x, accel);
            const auto k2 = deriv(x + 0.5 * h * k1, accel);
            const auto k3 = deriv(x + 0.5 * h * k2, accel);
            const auto k4 = deriv(x + h * k3, accel);
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (!x.allFinite()) {
            throw std::runtime_error("nonlinear repropagation diverged (non-finite state)");
        }
        traj.states.col(k + 1) = x;
    }
    return traj;
}

double delta_v(const Trajectory& traj, double mass_kg) {
    if (!(mass_kg > 0.0)) throw std::invalid_argument("mass must be positive");
    const double dt = traj.dt();
    // Rectangular (ZOH) sum over the N-1 hold intervals; the final control
    // sample never acts on the dynamics.
    double total = 0.0;
    for (int k = 0; k + 1 < traj.n_steps(); ++k) {
        total += traj.controls.col(k).norm() * dt / mass_kg;
    }
    return total;
}

}  // namespace stlcvx
