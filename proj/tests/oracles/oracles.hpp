#pragma once

// Independent brute-force references for the property and acceptance tests.
// Everything here recomputes results from first principles (quantifier
// enumeration, plain scans, finite differences, its own ODE right-hand side)
// and deliberately shares no code path with the library implementations it
// checks.

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <vector>

#include "stlcvx/formula.hpp"

namespace stlcvx::oracles {

enum class ScanKind { Min, Max };

// Running extremum with the window-entry hold semantics: out[0] = in[0],
// out[k] = ext(out[k-1], in[k]).
std::vector<double> running_extremum(const std::vector<double>& values, ScanKind kind);

// Per-predicate margin lookup, k is 1-based.
using MarginFn = std::function<double(const PredicateSpec&, int)>;

// Direct quantifier enumeration of the Boolean semantics at step k
// (1-based). Temporal operators use absolute windows clamped to the
// evaluation step: Before-interest nodes quantify over [k_a, clamp(k)],
// After-interest nodes over [clamp(k), k_b]. Derived operators evaluate
// natively (truth tables; until as exists-trigger-with-history).
bool quantifier_sat_at(const Formula& f, const MarginFn& margins, int n_steps, int k);

// Whole-trajectory verdict: the aggregate over the root's full window.
bool quantifier_eval(const Formula& f, const MarginFn& margins, int n_steps);

// Central difference (f(x+h) - f(x-h)) / 2h.
double finite_difference(const std::function<double(double)>& f, double x, double h = 1e-6);

Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h = 1e-6);

// Fixed-substep RK4 integration of the Clohessy-Wiltshire equations with its
// own right-hand side; controls are thrust columns (3 x N), mass converts to
// acceleration. Returns states (6 x N).
Eigen::MatrixXd rk4_cw(const Eigen::Matrix<double, 6, 1>& x0, const Eigen::MatrixXd& controls,
                       double dt, double mean_motion, double mass, int substeps = 10);

// --- randomized-test support -----------------------------------------------

struct FormulaGenOptions {
    int max_depth = 4;
    int n_predicates = 3;
    bool allow_derived = false;  // implies/iff/xor/until and free-standing not
    bool allow_after = true;     // After-interest temporal nodes
    bool flow_root = true;       // force an always/eventually root
};

// Pool of affine predicates over distinct state components with zero
// threshold, so margins equal the state entries directly.
std::vector<PredicateSpec> margin_predicates(int count);

FormulaPtr random_formula(std::mt19937& rng, const FormulaGenOptions& options);

}  // namespace stlcvx::oracles
