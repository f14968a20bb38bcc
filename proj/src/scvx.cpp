#include "stlcvx/scvx.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "stlcvx/graph.hpp"
#include "stlcvx/linearizer.hpp"
#include "stlcvx/semantics.hpp"

namespace stlcvx {

void ScvxConfig::validate() const {
    if (!(dilate_factor > 1.0)) throw std::invalid_argument("dilate_factor must exceed 1");
    if (!(shrink_factor > 0.0 && shrink_factor < 1.0)) {
        throw std::invalid_argument("shrink_factor must lie in (0,1)");
    }
    if (!(w_omega_relax > 0.0 && w_omega_relax < 1.0)) {
        throw std::invalid_argument("w_omega_relax must lie in (0,1)");
    }
    if (!(w_omega_grow > 1.0)) throw std::invalid_argument("w_omega_grow must exceed 1");
    if (!(eps_converge > 0.0)) throw std::invalid_argument("eps_converge must be positive");
    if (!(w_omega_init <= 0.0)) throw std::invalid_argument("w_omega_init must be nonpositive");
    if (!(trust_radius_init > 0.0) || !(trust_radius_floor > 0.0) ||
        !(trust_radius_ceil >= trust_radius_floor)) {
        throw std::invalid_argument("trust region bounds are inconsistent");
    }
    if (max_outer_iter < 1) throw std::invalid_argument("max_outer_iter must be positive");
    if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be nonnegative");
}

void ScvxTrace::write_csv(std::ostream& out) const {
    out << "iter,status,accepted,satisfied,cost_jstl,energy,delta_v,root_margin,eps_c,"
           "trust_radius,w_omega\n";
    out.precision(12);
    for (const ScvxIterationRecord& r : iterations) {
        out << r.iter << ',' << r.subproblem_status << ',' << (r.accepted ? 1 : 0) << ','
            << (r.satisfied ? 1 : 0) << ',' << r.cost_jstl << ',' << r.energy << ',' << r.delta_v
            << ',' << r.root_margin << ',' << r.eps_c << ',' << r.trust_radius << ',' << r.w_omega
            << '\n';
    }
}

double update_stl_weight(double w_omega, bool satisfied_now, bool ever_satisfied,
                         const ScvxConfig& cfg) {
    if (satisfied_now) return w_omega * cfg.w_omega_relax;
    if (ever_satisfied) return w_omega / cfg.w_omega_relax;
    return w_omega * cfg.w_omega_grow;
}

Eigen::VectorXd update_trust_region(Eigen::VectorXd radii, bool satisfied_now,
                                    const ScvxConfig& cfg) {
    radii *= satisfied_now ? cfg.shrink_factor : cfg.dilate_factor;
    return radii.cwiseMax(cfg.trust_radius_floor).cwiseMin(cfg.trust_radius_ceil);
}

namespace {

// Subproblem variable layout, all indices 0-based:
//   states    [0, 6N)        6 per step
//   controls  [6N, 9N)       3 per step
//   sigma     [9N, 10N)      thrust-norm epigraph, 1 per step
//   alpha     [10N, 10N+mN)  STL variables per node
struct VarLayout {
    int n_steps = 0;
    int n_nodes = 0;
    int state(int k, int i) const { return (k - 1) * kStateDim + i; }
    int control(int k, int i) const { return kStateDim * n_steps + (k - 1) * kControlDim + i; }
    int sigma(int k) const { return kSignalWidth * n_steps + (k - 1); }
    int alpha(int node, int k) const {
        return (kSignalWidth + 1) * n_steps + node * n_steps + (k - 1);
    }
    int total() const { return (kSignalWidth + 1 + n_nodes) * n_steps; }
};

struct SubproblemBuilder {
    const PlantParams& plant;
    const DiscreteModel& model;
    VarLayout layout;

    ConicProblem build(const LinearBlockSystem& stl, const Trajectory& ref,
                       const Eigen::Matrix<double, 6, 1>& x1,
                       const Eigen::Matrix<double, 6, 1>& xf, const Eigen::VectorXd& trust_radius,
                       double w_omega) const {
        const int n = layout.n_steps;
        ConicProblem p;
        p.num_vars = layout.total();
        p.cost = Eigen::VectorXd::Zero(p.num_vars);
        const double fuel_coeff = plant.dt_s / plant.mass_kg;
        for (int k = 1; k <= n; ++k) p.cost(layout.sigma(k)) = fuel_coeff;
        const int terminal = map_stl_col(stl, stl.terminal_col);
        p.cost(terminal) += w_omega;

        p.lower = Eigen::VectorXd::Constant(p.num_vars, -kInf);
        p.upper = Eigen::VectorXd::Constant(p.num_vars, kInf);
        for (int k = 1; k <= n; ++k) {
            for (int i = 0; i < kControlDim; ++i) {
                p.lower(layout.control(k, i)) = -plant.max_thrust_n;
                p.upper(layout.control(k, i)) = plant.max_thrust_n;
            }
            p.lower(layout.sigma(k)) = 0.0;
            p.upper(layout.sigma(k)) = plant.max_thrust_n;
        }
        p.lower(terminal) = 0.0;  // terminal STL inequality

        // Equalities: dynamics, boundary, STL block rows.
        const int dyn_rows = kStateDim * (n - 1);
        const int bnd_rows = 2 * kStateDim;
        const int stl_rows = stl.n_rows();
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dyn_rows + bnd_rows + stl_rows);
        int row = 0;
        for (int k = 1; k < n; ++k) {
            for (int i = 0; i < kStateDim; ++i, ++row) {
                trip.emplace_back(row, layout.state(k + 1, i), 1.0);
                for (int j = 0; j < kStateDim; ++j) {
                    if (model.a_d(i, j) != 0.0) {
                        trip.emplace_back(row, layout.state(k, j), -model.a_d(i, j));
                    }
                }
                for (int j = 0; j < kControlDim; ++j) {
                    if (model.b_d(i, j) != 0.0) {
                        trip.emplace_back(row, layout.control(k, j), -model.b_d(i, j));
                    }
                }
            }
        }
        for (int i = 0; i < kStateDim; ++i, ++row) {
            trip.emplace_back(row, layout.state(1, i), 1.0);
            rhs(row) = x1(i);
        }
        for (int i = 0; i < kStateDim; ++i, ++row) {
            trip.emplace_back(row, layout.state(n, i), 1.0);
            rhs(row) = xf(i);
        }
        const int stl_base = row;
        for (int outer = 0; outer < stl.matrix.outerSize(); ++outer) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(stl.matrix, outer); it; ++it) {
                trip.emplace_back(stl_base + static_cast<int>(it.row()),
                                  map_stl_col(stl, static_cast<int>(it.col())), it.value());
            }
        }
        rhs.segment(stl_base, stl_rows) = stl.rhs;
        p.eq_matrix.resize(stl_base + stl_rows, p.num_vars);
        p.eq_matrix.setFromTriplets(trip.begin(), trip.end());
        p.eq_rhs = rhs;

        // Thrust epigraph cones ||u_k|| <= sigma_k and position trust regions.
        for (int k = 1; k <= n; ++k) {
            SocConstraint epi;
            epi.bound.terms.push_back({layout.sigma(k), 1.0});
            for (int i = 0; i < kControlDim; ++i) {
                AffineExpr e;
                e.terms.push_back({layout.control(k, i), 1.0});
                epi.vec.push_back(e);
            }
            p.socs.push_back(std::move(epi));
        }
        for (int k = 1; k <= n; ++k) {
            SocConstraint tr;
            tr.bound.constant = trust_radius(k - 1);
            for (int i = 0; i < 3; ++i) {
                AffineExpr e;
                e.terms.push_back({layout.state(k, i), 1.0});
                e.constant = -ref.states(i, k - 1);
                tr.vec.push_back(e);
            }
            p.socs.push_back(std::move(tr));
        }
        return p;
    }

    // Maps a block-system column (per-step [state; control] signals, then
    // alpha blocks) onto the subproblem layout.
    int map_stl_col(const LinearBlockSystem& stl, int col) const {
        const int n = layout.n_steps;
        const int x_cols = kSignalWidth * n;
        if (col < x_cols) {
            const int k = col / kSignalWidth + 1;
            const int j = col % kSignalWidth;
            return j < kStateDim ? layout.state(k, j) : layout.control(k, j - kStateDim);
        }
        const int rel = col - x_cols;
        return layout.alpha(rel / n, rel % n + 1);
    }
};

}  // namespace

std::pair<Trajectory, ScvxTrace> run_scvx(const ScvxProblem& problem,
                                          const IterationCallback& on_iterate) {
    const ScvxConfig& cfg = problem.config;
    cfg.validate();
    problem.plant.validate();

    FormulaPtr core = desugar(problem.formula);
    validate_top(*core);
    const StlGraph graph = compile(core, problem.plant.n_steps);
    const DiscreteModel model = cw_discretize(problem.plant);
    const int n = problem.plant.n_steps;

    auto repropagate = [&](const Eigen::MatrixXd& controls) {
        return cfg.nonlinear_reprop
                   ? repropagate_nonlinear(problem.plant, problem.x_initial, controls,
                                           cfg.reprop_substeps)
                   : repropagate_linear(model, problem.plant, problem.x_initial, controls);
    };

    // Free-drift initialization.
    Trajectory ref = repropagate(Eigen::MatrixXd::Zero(kControlDim, n));
    if (on_iterate) on_iterate(0, ref);

    ExactEvaluation ref_eval = eval_exact(*core, ref);
    bool last_satisfied = ref_eval.root_margin > 0.0;
    double last_margin = ref_eval.root_margin;
    bool ever_satisfied = last_satisfied;

    Eigen::VectorXd trust_radius = Eigen::VectorXd::Constant(n, cfg.trust_radius_init);
    double w_omega = cfg.w_omega_init;

    auto update_weights = [&](bool satisfied_now) {
        if (satisfied_now) {
            w_omega *= cfg.w_omega_relax;
        } else if (ever_satisfied) {
            w_omega /= cfg.w_omega_relax;
        } else {
            w_omega *= cfg.w_omega_grow;
        }
    };
    auto update_trust_region = [&](bool satisfied_now) {
        const double factor = satisfied_now ? cfg.shrink_factor : cfg.dilate_factor;
        trust_radius *= factor;
        trust_radius = trust_radius.cwiseMax(cfg.trust_radius_floor)
                           .cwiseMin(cfg.trust_radius_ceil);
    };

    SubproblemBuilder builder{problem.plant, model, {n, graph.n_nodes()}};
    SolverOptions qp_opts;
    qp_opts.tol_primal = cfg.qp_tol;
    qp_opts.tol_dual = cfg.qp_tol;
    qp_opts.max_iter = cfg.qp_max_iter;

    ScvxTrace trace;
    WarmStart warm;
    bool have_warm = false;

    for (int iter = 1; iter <= cfg.max_outer_iter; ++iter) {
        ScvxIterationRecord rec;
        rec.iter = iter;
        rec.trust_radius = trust_radius.maxCoeff();
        rec.w_omega = w_omega;

        const ReferencePoint refpt = make_reference(graph, ref, cfg.kappa);
        const LinearBlockSystem stl = assemble(graph, refpt, cfg.kappa);
        const ConicProblem sub = builder.build(stl, ref, problem.x_initial, problem.x_final,
                                               trust_radius, w_omega);
        ConicSolver solver(sub, qp_opts);
        const ConicSolution sol = solver.solve(have_warm ? &warm : nullptr);
        rec.subproblem_status = solve_status_name(sol.status);

        if (sol.status != SolveStatus::Optimal) {
            // Not feasible: open the trust region and keep pressing the weight.
            rec.satisfied = last_satisfied;
            rec.root_margin = last_margin;
            rec.eps_c = std::nan("");
            rec.delta_v = std::nan("");
            update_trust_region(false);
            update_weights(last_satisfied);
            trace.iterations.push_back(rec);
            continue;
        }
        warm = WarmStart{sol.z, sol.dual, sol.slack};
        have_warm = true;

        Eigen::MatrixXd controls(kControlDim, n);
        Eigen::MatrixXd sol_states(kStateDim, n);
        for (int k = 1; k <= n; ++k) {
            for (int i = 0; i < kControlDim; ++i) controls(i, k - 1) = sol.z(builder.layout.control(k, i));
            for (int i = 0; i < kStateDim; ++i) sol_states(i, k - 1) = sol.z(builder.layout.state(k, i));
        }
        double eps_c = 0.0;
        for (int k = 0; k < n; ++k) {
            eps_c = std::max(eps_c,
                             (sol_states.col(k).head<3>() - ref.states.col(k).head<3>()).norm());
        }

        const Trajectory reprop = repropagate(controls);
        const ExactEvaluation eval = eval_exact(*core, reprop);
        const bool satisfied = eval.root_margin > 0.0;

        double accuracy_gap = 0.0;
        for (int k = 0; k < n; ++k) {
            accuracy_gap = std::max(
                accuracy_gap, (reprop.states.col(k).head<3>() - sol_states.col(k).head<3>()).norm());
        }
        const bool accurate = accuracy_gap <= cfg.accuracy_factor * cfg.eps_converge;
        const bool converged = eps_c <= cfg.eps_converge && satisfied;

        rec.cost_jstl = sub.objective(sol.z);
        double energy = 0.0;
        for (int k = 1; k <= n; ++k) energy += sol.z(builder.layout.sigma(k));
        rec.energy = energy * problem.plant.dt_s / problem.plant.mass_kg;
        rec.delta_v = delta_v(reprop, problem.plant.mass_kg);
        rec.root_margin = eval.root_margin;
        rec.satisfied = satisfied;
        rec.eps_c = eps_c;

        last_satisfied = satisfied;
        last_margin = eval.root_margin;
        ever_satisfied = ever_satisfied || satisfied;

        if (!accurate) {
            update_trust_region(satisfied);
            update_weights(satisfied);
            trace.iterations.push_back(rec);
            if (on_iterate) on_iterate(iter, reprop);
            continue;
        }

        rec.accepted = true;
        ref = reprop;
        trace.iterations.push_back(rec);
        if (on_iterate) on_iterate(iter, reprop);

        if (converged) {
            trace.converged = true;
            trace.satisfied = satisfied;
            trace.termination = "converged";
            return {ref, trace};
        }
        update_trust_region(satisfied);
        update_weights(satisfied);
    }

    trace.converged = false;
    trace.satisfied = last_satisfied;
    trace.termination = "max_outer_iter";
    return {ref, trace};
}

}  // namespace stlcvx
