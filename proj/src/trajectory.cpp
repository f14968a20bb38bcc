#include "stlcvx/trajectory.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace stlcvx {

const std::map<std::string, SignalSlice>& signal_registry() {
    static const std::map<std::string, SignalSlice> registry = {
        {"r", {0, 3}},
        {"v", {3, 3}},
        {"F", {kStateDim, 3}},
    };
    return registry;
}

SignalSlice resolve_signal(const std::string& name) {
    const auto& reg = signal_registry();
    auto it = reg.find(name);
    if (it == reg.end()) {
        throw std::invalid_argument("unknown signal name: '" + name + "'");
    }
    return it->second;
}

double Trajectory::dt() const {
    if (times.size() < 2) throw std::invalid_argument("trajectory needs at least 2 steps");
    return times(1) - times(0);
}

Eigen::VectorXd Trajectory::stacked_at(int k) const {
    Eigen::VectorXd w(kSignalWidth);
    w.head<kStateDim>() = states.col(k - 1);
    w.tail<kControlDim>() = controls.col(k - 1);
    return w;
}

Eigen::VectorXd Trajectory::signal_at(const SignalSlice& slice, int k) const {
    return stacked_at(k).segment(slice.offset, slice.size);
}

void Trajectory::validate() const {
    const int n = n_steps();
    if (n < 2) throw std::invalid_argument("trajectory needs at least 2 steps");
    if (states.rows() != kStateDim || states.cols() != n ||
        controls.rows() != kControlDim || controls.cols() != n) {
        throw std::invalid_argument("trajectory dimension mismatch");
    }
    const double step = times(1) - times(0);
    if (!(step > 0.0)) throw std::invalid_argument("time grid must be strictly increasing");
    for (int k = 1; k + 1 < n; ++k) {
        const double d = times(k + 1) - times(k);
        if (std::abs(d - step) > 1e-9 * std::max(1.0, std::abs(step))) {
            throw std::invalid_argument("time grid must be uniform");
        }
    }
    if (!times.allFinite() || !states.allFinite() || !controls.allFinite()) {
        throw std::invalid_argument("trajectory contains non-finite entries");
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        // trim whitespace
        size_t lo = field.find_first_not_of(" \t\r");
        size_t hi = field.find_last_not_of(" \t\r");
        out.push_back(lo == std::string::npos ? "" : field.substr(lo, hi - lo + 1));
    }
    return out;
}

const std::vector<std::string> kColumns = {"t",  "x",  "y",  "z",  "vx",
                                           "vy", "vz", "Fx", "Fy", "Fz"};

}  // namespace

Trajectory read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty trajectory CSV");
    auto header = split_csv_line(line);
    if (header.size() != kColumns.size()) {
        throw std::invalid_argument("trajectory CSV header must have 10 columns");
    }
    for (size_t i = 0; i < kColumns.size(); ++i) {
        if (header[i] != kColumns[i]) {
            throw std::invalid_argument("trajectory CSV header mismatch at column " +
                                        std::to_string(i + 1) + ": expected '" + kColumns[i] +
                                        "', got '" + header[i] + "'");
        }
    }
    std::vector<std::array<double, 10>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 10) {
            throw std::invalid_argument("trajectory CSV line " + std::to_string(lineno) +
                                        ": expected 10 fields, got " +
                                        std::to_string(fields.size()));
        }
        std::array<double, 10> row{};
        for (int i = 0; i < 10; ++i) {
            try {
                row[i] = std::stod(fields[i]);
            } catch (const std::exception&) {
                throw std::invalid_argument("trajectory CSV line " + std::to_string(lineno) +
                                            ": bad number '" + fields[i] + "'");
            }
        }
        rows.push_back(row);
    }
    const int n = static_cast<int>(rows.size());
    if (n < 2) throw std::invalid_argument("trajectory CSV needs at least 2 data rows");
    Trajectory traj;
    traj.times.resize(n);
    traj.states.resize(kStateDim, n);
    traj.controls.resize(kControlDim, n);
    for (int k = 0; k < n; ++k) {
        traj.times(k) = rows[k][0];
        for (int i = 0; i < kStateDim; ++i) traj.states(i, k) = rows[k][1 + i];
        for (int i = 0; i < kControlDim; ++i) traj.controls(i, k) = rows[k][7 + i];
    }
    traj.validate();
    return traj;
}

Trajectory read_trajectory_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open trajectory file: " + path);
    return read_trajectory_csv(in);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "t,x,y,z,vx,vy,vz,Fx,Fy,Fz\n";
    out << std::setprecision(17);
    for (int k = 0; k < traj.n_steps(); ++k) {
        out << traj.times(k);
        for (int i = 0; i < kStateDim; ++i) out << ',' << traj.states(i, k);
        for (int i = 0; i < kControlDim; ++i) out << ',' << traj.controls(i, k);
        out << '\n';
    }
}

void write_trajectory_csv_file(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trajectory file: " + path);
    write_trajectory_csv(out, traj);
}

}  // namespace stlcvx
