#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

namespace stlcvx {

// Convex subproblem solver: linear (optionally diagonal-quadratic) cost over
// linear equalities, componentwise bounds, and second-order cones
// ||v(z)|| <= t(z) with affine v and t. Solved by ADMM-style operator
// splitting with projections onto the constraint sets, after Ruiz
// equilibration of the stacked constraint matrix. Deterministic: identical
// inputs produce identical iterate sequences.

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinearTerm {
    int col = 0;
    double coeff = 0.0;
};

struct AffineExpr {
    std::vector<LinearTerm> terms;
    double constant = 0.0;
};

// ||vec(z)|| <= bound(z)
struct SocConstraint {
    AffineExpr bound;
    std::vector<AffineExpr> vec;
};

struct ConicProblem {
    int num_vars = 0;
    Eigen::VectorXd cost;            // linear term c
    Eigen::VectorXd cost_quad_diag;  // optional diagonal quadratic (size 0 or num_vars)
    Eigen::SparseMatrix<double> eq_matrix;
    Eigen::VectorXd eq_rhs;
    Eigen::VectorXd lower, upper;  // size num_vars; +-inf for unbounded
    std::vector<SocConstraint> socs;

    void validate() const;
    double objective(const Eigen::VectorXd& z) const;
};

enum class SolveStatus { Optimal, Infeasible, MaxIter };

const char* solve_status_name(SolveStatus s);

struct ConicSolution {
    Eigen::VectorXd z;
    Eigen::VectorXd dual;   // stacked multipliers (equalities, boxes, cones)
    Eigen::VectorXd slack;  // stacked slacks in the same layout
    SolveStatus status = SolveStatus::MaxIter;
    double primal_residual = kInf;
    double dual_residual = kInf;
    int iterations = 0;
};

struct SolverOptions {
    double tol_primal = 1e-6;
    double tol_dual = 1e-6;
    int max_iter = 20000;
    double rho = 0.1;
    double rho_eq_factor = 1e3;  // stiffer penalty on equality rows
    double sigma = 1e-6;
    double relaxation = 1.6;
    int ruiz_iterations = 10;
    int check_interval = 25;
};

struct WarmStart {
    Eigen::VectorXd z;
    Eigen::VectorXd dual;
    Eigen::VectorXd slack;
};

class ConicSolver {
  public:
    explicit ConicSolver(const ConicProblem& problem, SolverOptions options = {});
    ~ConicSolver();
    ConicSolver(ConicSolver&&) noexcept;
    ConicSolver& operator=(ConicSolver&&) noexcept;

    ConicSolution solve(const WarmStart* warm = nullptr);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

ConicSolution solve(const ConicProblem& problem, SolverOptions options = {});

// Ruiz-style equilibration: returns the rescaled problem plus the scaling
// vectors. unscale_primal(scale_primal(z)) == z.
struct Equilibration {
    Eigen::VectorXd col_scale;     // d: z = d .* z_scaled
    Eigen::VectorXd eq_row_scale;  // one entry per equality row
    Eigen::VectorXd soc_scale;     // one entry per cone
    double cost_scale = 1.0;

    Eigen::VectorXd scale_primal(const Eigen::VectorXd& z) const;
    Eigen::VectorXd unscale_primal(const Eigen::VectorXd& z_scaled) const;
};

std::pair<ConicProblem, Equilibration> equilibrate(const ConicProblem& problem,
                                                   int iterations = 10);

}  // namespace stlcvx
