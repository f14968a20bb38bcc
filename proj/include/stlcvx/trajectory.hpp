#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <string>

namespace stlcvx {

inline constexpr int kStateDim = 6;    // x, y, z, vx, vy, vz
inline constexpr int kControlDim = 3;  // Fx, Fy, Fz
inline constexpr int kSignalWidth = kStateDim + kControlDim;

// Contiguous slice of the per-step stacked [state; control] vector.
struct SignalSlice {
    int offset = 0;
    int size = 0;
};

// Built-in named selectors: r (position), v (velocity), F (thrust).
const std::map<std::string, SignalSlice>& signal_registry();

// Throws std::invalid_argument for unknown names.
SignalSlice resolve_signal(const std::string& name);

// Discrete trajectory on a uniform time grid. Column k-1 holds step k;
// all public indexing is 1-based (k = 1..N).
struct Trajectory {
    Eigen::VectorXd times;     // s
    Eigen::MatrixXd states;    // kStateDim x N (m, m/s)
    Eigen::MatrixXd controls;  // kControlDim x N (N)

    int n_steps() const { return static_cast<int>(times.size()); }
    double dt() const;

    // Stacked [state; control] at step k.
    Eigen::VectorXd stacked_at(int k) const;
    Eigen::VectorXd signal_at(const SignalSlice& slice, int k) const;

    // Checks N >= 2, uniform positive step, finite entries.
    void validate() const;
};

// CSV with required header t,x,y,z,vx,vy,vz,Fx,Fy,Fz.
Trajectory read_trajectory_csv(std::istream& in);
Trajectory read_trajectory_csv_file(const std::string& path);
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_trajectory_csv_file(const std::string& path, const Trajectory& traj);

}  // namespace stlcvx
