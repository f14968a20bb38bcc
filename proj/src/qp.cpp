#include "stlcvx/qp.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stlcvx {

const char* solve_status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::MaxIter: return "max_iter";
    }
    return "?";
}

void ConicProblem::validate() const {
    if (num_vars <= 0) throw std::invalid_argument("conic problem needs at least one variable");
    if (cost.size() != num_vars) throw std::invalid_argument("cost dimension mismatch");
    if (cost_quad_diag.size() != 0 && cost_quad_diag.size() != num_vars) {
        throw std::invalid_argument("quadratic cost diagonal dimension mismatch");
    }
    if (cost_quad_diag.size() != 0 && (cost_quad_diag.array() < 0.0).any()) {
        throw std::invalid_argument("quadratic cost diagonal must be nonnegative");
    }
    if (eq_matrix.rows() != eq_rhs.size() ||
        (eq_matrix.rows() > 0 && eq_matrix.cols() != num_vars)) {
        throw std::invalid_argument("equality block dimension mismatch");
    }
    if (lower.size() != num_vars || upper.size() != num_vars) {
        throw std::invalid_argument("bound vectors must cover all variables");
    }
    for (int i = 0; i < num_vars; ++i) {
        if (lower(i) > upper(i)) throw std::invalid_argument("lower bound exceeds upper bound");
    }
    auto check_expr = [&](const AffineExpr& e) {
        if (!std::isfinite(e.constant)) throw std::invalid_argument("non-finite cone constant");
        for (const LinearTerm& t : e.terms) {
            if (t.col < 0 || t.col >= num_vars) {
                throw std::invalid_argument("cone term references invalid column");
            }
            if (!std::isfinite(t.coeff)) throw std::invalid_argument("non-finite cone coefficient");
        }
    };
    for (const SocConstraint& soc : socs) {
        check_expr(soc.bound);
        for (const AffineExpr& e : soc.vec) check_expr(e);
    }
    if (!cost.allFinite() || !eq_rhs.allFinite()) {
        throw std::invalid_argument("non-finite problem data");
    }
}

double ConicProblem::objective(const Eigen::VectorXd& z) const {
    double obj = cost.dot(z);
    if (cost_quad_diag.size() > 0) obj += 0.5 * z.dot(cost_quad_diag.cwiseProduct(z));
    return obj;
}

namespace {

enum class RowKind { Zero, Box, Soc };

struct ConeBlock {
    int start = 0;
    int dim = 0;  // 1 + size of the vector part
};

// Stacked constraint form  M z + s = h, s in (0)^meq x Box x SOC...
struct Stacked {
    int n = 0;
    int m = 0;
    int m_eq = 0;
    std::vector<Eigen::Triplet<double>> triplets;  // physical M
    Eigen::VectorXd h;
    std::vector<RowKind> row_kind;
    Eigen::VectorXd box_lower, box_upper;  // aligned with rows; only Box rows used
    std::vector<int> box_var;              // variable index per box row (-1 otherwise)
    std::vector<ConeBlock> cones;
};

Stacked build_stacked(const ConicProblem& p) {
    Stacked st;
    st.n = p.num_vars;
    st.m_eq = static_cast<int>(p.eq_matrix.rows());
    int m = st.m_eq;
    std::vector<int> box_vars;
    for (int i = 0; i < p.num_vars; ++i) {
        if (p.lower(i) > -kInf || p.upper(i) < kInf) box_vars.push_back(i);
    }
    m += static_cast<int>(box_vars.size());
    for (const SocConstraint& soc : p.socs) m += 1 + static_cast<int>(soc.vec.size());
    st.m = m;
    st.h = Eigen::VectorXd::Zero(m);
    st.row_kind.assign(m, RowKind::Zero);
    st.box_lower = Eigen::VectorXd::Constant(m, -kInf);
    st.box_upper = Eigen::VectorXd::Constant(m, kInf);
    st.box_var.assign(m, -1);

    for (int outer = 0; outer < p.eq_matrix.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(p.eq_matrix, outer); it; ++it) {
            st.triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                     it.value());
        }
    }
    st.h.head(st.m_eq) = p.eq_rhs;

    int row = st.m_eq;
    for (int i : box_vars) {
        st.triplets.emplace_back(row, i, -1.0);
        st.row_kind[row] = RowKind::Box;
        st.box_lower(row) = p.lower(i);
        st.box_upper(row) = p.upper(i);
        st.box_var[row] = i;
        ++row;
    }
    auto add_expr_row = [&](const AffineExpr& e, int r) {
        for (const LinearTerm& t : e.terms) st.triplets.emplace_back(r, t.col, -t.coeff);
        st.h(r) = e.constant;
        st.row_kind[r] = RowKind::Soc;
    };
    for (const SocConstraint& soc : p.socs) {
        ConeBlock block{row, 1 + static_cast<int>(soc.vec.size())};
        add_expr_row(soc.bound, row++);
        for (const AffineExpr& e : soc.vec) add_expr_row(e, row++);
        st.cones.push_back(block);
    }
    return st;
}

struct Scaling {
    Eigen::VectorXd d;  // column scales
    Eigen::VectorXd e;  // row scales (box rows pinned to 1)
    double gamma = 1.0;
};

// Modified Ruiz equilibration over the stacked matrix; SOC blocks share one
// uniform scale so cone membership is preserved, box rows stay unscaled so
// their slacks remain in physical units.
Scaling ruiz_equilibrate(const Stacked& st, const Eigen::VectorXd& quad_diag,
                         const Eigen::VectorXd& cost, int iterations) {
    Scaling sc;
    sc.d = Eigen::VectorXd::Ones(st.n);
    sc.e = Eigen::VectorXd::Ones(st.m);
    const double lo = 1e-6, hi = 1e6;
    auto clamp_scale = [&](double v) { return std::min(hi, std::max(lo, v)); };

    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd col_norm = Eigen::VectorXd::Zero(st.n);
        for (const auto& t : st.triplets) {
            col_norm(t.col()) =
                std::max(col_norm(t.col()), std::abs(t.value()) * sc.e(t.row()) * sc.d(t.col()));
        }
        if (quad_diag.size() > 0) {
            for (int j = 0; j < st.n; ++j) {
                col_norm(j) = std::max(col_norm(j), quad_diag(j) * sc.d(j) * sc.d(j));
            }
        }
        for (int j = 0; j < st.n; ++j) {
            if (col_norm(j) > 0.0) sc.d(j) = clamp_scale(sc.d(j) / std::sqrt(col_norm(j)));
        }
        Eigen::VectorXd row_norm = Eigen::VectorXd::Zero(st.m);
        for (const auto& t : st.triplets) {
            row_norm(t.row()) =
                std::max(row_norm(t.row()), std::abs(t.value()) * sc.e(t.row()) * sc.d(t.col()));
        }
        for (int r = 0; r < st.m_eq; ++r) {
            if (row_norm(r) > 0.0) sc.e(r) = clamp_scale(sc.e(r) / std::sqrt(row_norm(r)));
        }
        for (const ConeBlock& cone : st.cones) {
            double norm = 0.0;
            for (int r = cone.start; r < cone.start + cone.dim; ++r) {
                norm = std::max(norm, row_norm(r));
            }
            if (norm > 0.0) {
                const double delta = 1.0 / std::sqrt(norm);
                for (int r = cone.start; r < cone.start + cone.dim; ++r) {
                    sc.e(r) = clamp_scale(sc.e(r) * delta);
                }
            }
        }
    }
    // One-shot cost scaling to bring the scaled gradient toward unit size.
    double cost_norm = (sc.d.cwiseProduct(cost)).lpNorm<Eigen::Infinity>();
    if (quad_diag.size() > 0) {
        double mean_q = 0.0;
        for (int j = 0; j < st.n; ++j) mean_q += quad_diag(j) * sc.d(j) * sc.d(j);
        mean_q /= st.n;
        cost_norm = std::max(cost_norm, mean_q);
    }
    sc.gamma = cost_norm > 0.0 ? 1.0 / std::max(lo, std::min(hi, cost_norm)) : 1.0;
    return sc;
}

void project_soc(Eigen::Ref<Eigen::VectorXd> block) {
    const int dim = static_cast<int>(block.size());
    const double t = block(0);
    const double vnorm = dim > 1 ? block.tail(dim - 1).norm() : 0.0;
    if (vnorm <= t) return;
    if (vnorm <= -t) {
        block.setZero();
        return;
    }
    const double c = 0.5 * (t + vnorm);
    block(0) = c;
    if (dim > 1) block.tail(dim - 1) *= c / vnorm;
}

}  // namespace

struct ConicSolver::Impl {
    ConicProblem problem;
    SolverOptions opts;
    Stacked st;
    Scaling sc;
    Eigen::SparseMatrix<double> m_scaled;       // E M D
    Eigen::SparseMatrix<double> m_scaled_t;     // transpose, cached
    Eigen::VectorXd h_scaled;                   // E h
    Eigen::VectorXd c_scaled;                   // gamma D c
    Eigen::VectorXd q_scaled;                   // gamma D Q D diagonal
    Eigen::VectorXd rho_vec, rho_inv;
    double rho_current;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Upper> kkt;
    double sigma_used;

    Impl(const ConicProblem& p, SolverOptions o) : problem(p), opts(o) {
        problem.validate();
        st = build_stacked(problem);
        Eigen::VectorXd quad = problem.cost_quad_diag.size() > 0
                                   ? problem.cost_quad_diag
                                   : Eigen::VectorXd();
        sc = ruiz_equilibrate(st, quad, problem.cost, opts.ruiz_iterations);

        std::vector<Eigen::Triplet<double>> scaled;
        scaled.reserve(st.triplets.size());
        for (const auto& t : st.triplets) {
            scaled.emplace_back(t.row(), t.col(), sc.e(t.row()) * t.value() * sc.d(t.col()));
        }
        m_scaled.resize(st.m, st.n);
        m_scaled.setFromTriplets(scaled.begin(), scaled.end());
        m_scaled.makeCompressed();
        m_scaled_t = m_scaled.transpose();
        h_scaled = sc.e.cwiseProduct(st.h);
        c_scaled = sc.gamma * sc.d.cwiseProduct(problem.cost);
        q_scaled = Eigen::VectorXd::Zero(st.n);
        if (problem.cost_quad_diag.size() > 0) {
            q_scaled = sc.gamma * sc.d.array().square().matrix().cwiseProduct(problem.cost_quad_diag);
        }
        rho_current = opts.rho;
        build_rho();
        factorize();
    }

    void build_rho() {
        rho_vec.resize(st.m);
        for (int r = 0; r < st.m; ++r) {
            rho_vec(r) = st.row_kind[r] == RowKind::Zero ? rho_current * opts.rho_eq_factor
                                                         : rho_current;
        }
        rho_inv = rho_vec.cwiseInverse();
    }

    void factorize() {
        sigma_used = opts.sigma;
        for (int attempt = 0; attempt < 6; ++attempt) {
            std::vector<Eigen::Triplet<double>> trip;
            trip.reserve(m_scaled.nonZeros() + st.n + st.m);
            for (int j = 0; j < st.n; ++j) {
                trip.emplace_back(j, j, q_scaled(j) + sigma_used);
            }
            for (int outer = 0; outer < m_scaled.outerSize(); ++outer) {
                for (Eigen::SparseMatrix<double>::InnerIterator it(m_scaled, outer); it; ++it) {
                    // upper triangle: (col, n + row)
                    trip.emplace_back(static_cast<int>(it.col()), st.n + static_cast<int>(it.row()),
                                      it.value());
                }
            }
            for (int r = 0; r < st.m; ++r) {
                trip.emplace_back(st.n + r, st.n + r, -rho_inv(r));
            }
            Eigen::SparseMatrix<double> kkt_mat(st.n + st.m, st.n + st.m);
            kkt_mat.setFromTriplets(trip.begin(), trip.end());
            kkt_mat.makeCompressed();
            kkt.compute(kkt_mat);
            if (kkt.info() == Eigen::Success) return;
            sigma_used *= 10.0;
        }
        throw std::runtime_error("conic solver: KKT factorization failed");
    }

    void project(Eigen::VectorXd& s) const {
        for (int r = 0; r < st.m_eq; ++r) s(r) = 0.0;
        for (int r = st.m_eq; r < st.m; ++r) {
            if (st.row_kind[r] == RowKind::Box) {
                s(r) = std::min(st.box_upper(r), std::max(st.box_lower(r), s(r)));
            }
        }
        for (const ConeBlock& cone : st.cones) {
            project_soc(s.segment(cone.start, cone.dim));
        }
    }

    // Support-function based primal infeasibility certificate on a dual
    // displacement direction (physical units).
    bool primal_infeasibility_certificate(const Eigen::VectorXd& dy_scaled) const {
        const double norm_scaled = dy_scaled.lpNorm<Eigen::Infinity>();
        if (norm_scaled < 1e-12) return false;
        Eigen::VectorXd dy_phys = sc.e.cwiseProduct(dy_scaled) / sc.gamma;
        const double dy_norm = dy_phys.lpNorm<Eigen::Infinity>();
        if (dy_norm < 1e-14) return false;
        const double eps = 1e-7 * dy_norm;

        Eigen::VectorXd mt_dy = m_scaled_t * dy_scaled;  // = D M^T E dy_scaled
        mt_dy = mt_dy.cwiseQuotient(sc.d) / sc.gamma;    // physical M^T dy
        if (mt_dy.lpNorm<Eigen::Infinity>() > eps) return false;

        double gap = h_scaled.dot(dy_scaled) / sc.gamma;  // <h, dy_phys>
        for (int r = st.m_eq; r < st.m; ++r) {
            if (st.row_kind[r] != RowKind::Box) continue;
            const double y = dy_phys(r);
            if (y > 0.0) {
                if (st.box_upper(r) >= kInf) return false;
                gap -= st.box_upper(r) * y;
            } else if (y < 0.0) {
                if (st.box_lower(r) <= -kInf) return false;
                gap -= st.box_lower(r) * y;
            }
        }
        for (const ConeBlock& cone : st.cones) {
            // support is finite (zero) only for -dy in the cone
            const double t = -dy_phys(cone.start);
            const double vnorm =
                cone.dim > 1 ? dy_phys.segment(cone.start + 1, cone.dim - 1).norm() : 0.0;
            if (!(t >= vnorm - eps)) return false;
        }
        return gap > eps;
    }

    ConicSolution run(const WarmStart* warm) {
        const int n = st.n, m = st.m;
        Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd s = h_scaled;
        Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
        if (warm != nullptr && warm->z.size() == n && warm->dual.size() == m &&
            warm->slack.size() == m) {
            z = warm->z.cwiseQuotient(sc.d);
            y = sc.gamma * warm->dual.cwiseQuotient(sc.e);
            s = sc.e.cwiseProduct(warm->slack);
        }
        project(s);

        Eigen::VectorXd rhs(n + m), sol(n + m), s_tilde(m), s_relax(m), s_new(m);
        Eigen::VectorXd y_prev_check = y;
        ConicSolution result;
        const double alpha = opts.relaxation;
        double best_prim = kInf;
        int best_prim_iter = 0;
        int iter = 0;

        for (iter = 1; iter <= opts.max_iter; ++iter) {
            rhs.head(n) = sigma_used * z - c_scaled;
            rhs.tail(m) = h_scaled - s + rho_inv.cwiseProduct(y);
            sol = kkt.solve(rhs);
            const auto x_tilde = sol.head(n);
            const auto nu = sol.tail(m);
            s_tilde = s - rho_inv.cwiseProduct(nu + y);
            z = alpha * x_tilde + (1.0 - alpha) * z;
            s_relax = alpha * s_tilde + (1.0 - alpha) * s;
            s_new = s_relax + rho_inv.cwiseProduct(y);
            project(s_new);
            y += rho_vec.cwiseProduct(s_relax - s_new);
            s = s_new;

            if (iter % opts.check_interval != 0 && iter != opts.max_iter) continue;

            // Residuals in physical units.
            Eigen::VectorXd mz = m_scaled * z;
            Eigen::VectorXd prim_vec = (mz + s - h_scaled).cwiseQuotient(sc.e);
            Eigen::VectorXd qz = q_scaled.cwiseProduct(z);
            Eigen::VectorXd mty = m_scaled_t * y;
            Eigen::VectorXd dual_vec =
                (qz + c_scaled + mty).cwiseQuotient(sc.d) / sc.gamma;
            const double r_prim = prim_vec.lpNorm<Eigen::Infinity>();
            const double r_dual = dual_vec.lpNorm<Eigen::Infinity>();
            const double prim_scale =
                std::max({(mz.cwiseQuotient(sc.e)).lpNorm<Eigen::Infinity>(),
                          (s.cwiseQuotient(sc.e)).lpNorm<Eigen::Infinity>(),
                          st.h.lpNorm<Eigen::Infinity>()});
            const double dual_scale =
                std::max({(qz.cwiseQuotient(sc.d)).lpNorm<Eigen::Infinity>() / sc.gamma,
                          (mty.cwiseQuotient(sc.d)).lpNorm<Eigen::Infinity>() / sc.gamma,
                          problem.cost.lpNorm<Eigen::Infinity>()});
            const double eps_prim = opts.tol_primal * (1.0 + prim_scale);
            const double eps_dual = opts.tol_dual * (1.0 + dual_scale);

            result.primal_residual = r_prim;
            result.dual_residual = r_dual;
            result.iterations = iter;

            if (r_prim <= eps_prim && r_dual <= eps_dual) {
                result.status = SolveStatus::Optimal;
                break;
            }
            if (r_prim > eps_prim) {
                Eigen::VectorXd dy = y - y_prev_check;
                if (primal_infeasibility_certificate(dy)) {
                    result.status = SolveStatus::Infeasible;
                    break;
                }
            }
            // Stagnation heuristic: primal residual pinned while the duals blow up.
            if (r_prim < best_prim * 0.99) {
                best_prim = r_prim;
                best_prim_iter = iter;
            } else if (iter - best_prim_iter > 5000 &&
                       y.lpNorm<Eigen::Infinity>() > 1e8 * (1.0 + st.h.lpNorm<Eigen::Infinity>()) &&
                       r_prim > 1e3 * eps_prim) {
                result.status = SolveStatus::Infeasible;
                break;
            }
            y_prev_check = y;

            // Adaptive penalty: rebalance rho when the residuals diverge.
            if (iter % (opts.check_interval * 10) == 0) {
                const double np = r_prim / (1.0 + prim_scale);
                const double nd = r_dual / (1.0 + dual_scale);
                if (np > 0.0 && nd > 0.0) {
                    const double ratio = std::sqrt(np / nd);
                    if (ratio > 5.0 || ratio < 0.2) {
                        rho_current = std::min(1e6, std::max(1e-6, rho_current * ratio));
                        build_rho();
                        factorize();
                    }
                }
            }
        }
        if (result.status != SolveStatus::Optimal && result.status != SolveStatus::Infeasible) {
            result.status = SolveStatus::MaxIter;
            result.iterations = std::min(iter, opts.max_iter);
        }
        result.z = sc.d.cwiseProduct(z);
        result.dual = sc.e.cwiseProduct(y) / sc.gamma;
        result.slack = s.cwiseQuotient(sc.e);
        return result;
    }
};

ConicSolver::ConicSolver(const ConicProblem& problem, SolverOptions options)
    : impl_(std::make_unique<Impl>(problem, options)) {}
ConicSolver::~ConicSolver() = default;
ConicSolver::ConicSolver(ConicSolver&&) noexcept = default;
ConicSolver& ConicSolver::operator=(ConicSolver&&) noexcept = default;

ConicSolution ConicSolver::solve(const WarmStart* warm) { return impl_->run(warm); }

ConicSolution solve(const ConicProblem& problem, SolverOptions options) {
    ConicSolver solver(problem, options);
    return solver.solve();
}

Eigen::VectorXd Equilibration::scale_primal(const Eigen::VectorXd& z) const {
    return z.cwiseQuotient(col_scale);
}

Eigen::VectorXd Equilibration::unscale_primal(const Eigen::VectorXd& z_scaled) const {
    return col_scale.cwiseProduct(z_scaled);
}

std::pair<ConicProblem, Equilibration> equilibrate(const ConicProblem& problem, int iterations) {
    problem.validate();
    Stacked st = build_stacked(problem);
    Eigen::VectorXd quad =
        problem.cost_quad_diag.size() > 0 ? problem.cost_quad_diag : Eigen::VectorXd();
    Scaling sc = ruiz_equilibrate(st, quad, problem.cost, iterations);

    Equilibration eq;
    eq.col_scale = sc.d;
    eq.eq_row_scale = sc.e.head(st.m_eq);
    eq.soc_scale.resize(static_cast<int>(st.cones.size()));
    for (size_t i = 0; i < st.cones.size(); ++i) eq.soc_scale(static_cast<int>(i)) = sc.e(st.cones[i].start);
    eq.cost_scale = sc.gamma;

    ConicProblem scaled = problem;
    scaled.cost = sc.gamma * sc.d.cwiseProduct(problem.cost);
    if (problem.cost_quad_diag.size() > 0) {
        scaled.cost_quad_diag =
            sc.gamma * sc.d.array().square().matrix().cwiseProduct(problem.cost_quad_diag);
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (int outer = 0; outer < problem.eq_matrix.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(problem.eq_matrix, outer); it; ++it) {
            trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                              sc.e(it.row()) * it.value() * sc.d(it.col()));
        }
    }
    scaled.eq_matrix.resize(problem.eq_matrix.rows(), problem.eq_matrix.cols());
    scaled.eq_matrix.setFromTriplets(trip.begin(), trip.end());
    scaled.eq_rhs = eq.eq_row_scale.cwiseProduct(problem.eq_rhs);
    // Scaled variables are z/d, so the box tightens by the same factor.
    for (int i = 0; i < problem.num_vars; ++i) {
        scaled.lower(i) = problem.lower(i) > -kInf ? problem.lower(i) / sc.d(i) : -kInf;
        scaled.upper(i) = problem.upper(i) < kInf ? problem.upper(i) / sc.d(i) : kInf;
    }
    for (size_t c = 0; c < problem.socs.size(); ++c) {
        const double e = eq.soc_scale(static_cast<int>(c));
        auto scale_expr = [&](const AffineExpr& src) {
            AffineExpr out;
            out.constant = e * src.constant;
            for (const LinearTerm& t : src.terms) {
                out.terms.push_back({t.col, e * t.coeff * sc.d(t.col)});
            }
            return out;
        };
        scaled.socs[c].bound = scale_expr(problem.socs[c].bound);
        scaled.socs[c].vec.clear();
        for (const AffineExpr& v : problem.socs[c].vec) scaled.socs[c].vec.push_back(scale_expr(v));
    }
    return {std::move(scaled), std::move(eq)};
}

}  // namespace stlcvx
