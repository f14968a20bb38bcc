#include "stlcvx/linearizer.hpp"

#include <cmath>
#include <ostream>
#include <set>
#include <stdexcept>

#include "stlcvx/semantics.hpp"
#include "stlcvx/smoothing.hpp"

namespace stlcvx {

namespace {

double signed_margin(const StlGraph& g, const ParentRef& p, const Trajectory& traj, int k) {
    const double m = predicate_margin(g.predicates[p.index], traj, k);
    return p.negated ? -m : m;
}

}  // namespace

std::vector<Eigen::VectorXd> propagate_reference(const StlGraph& g, const Trajectory& traj,
                                                 double kappa, const SmoothingProbe* probe) {
    if (traj.n_steps() != g.n_steps) {
        throw std::invalid_argument("propagate_reference: trajectory / graph grid mismatch");
    }
    const int n = g.n_steps;
    std::vector<Eigen::VectorXd> alpha(g.n_nodes());

    auto input_value = [&](const ParentRef& p, int k) -> double {
        return p.is_node ? alpha[p.index](k - 1) : signed_margin(g, p, traj, k);
    };
    auto chi = [&](const StlNode& node, double a, double b) -> double {
        if (probe) (*probe)(a, b);
        return node.takes_min() ? smin(a, b, kappa) : smax(a, b, kappa);
    };

    for (const StlNode& node : g.nodes) {
        Eigen::VectorXd& vals = alpha[node.id];
        vals.resize(n);
        if (node.is_bridge()) {
            for (int k = 1; k <= n; ++k) {
                vals(k - 1) = chi(node, input_value(node.left, k), input_value(node.right, k));
            }
        } else if (node.direction == Direction::Forward) {
            const double entry = input_value(node.left, node.k_a);
            for (int k = 1; k <= node.k_a; ++k) vals(k - 1) = entry;
            for (int k = node.k_a + 1; k <= node.k_b; ++k) {
                vals(k - 1) = chi(node, vals(k - 2), input_value(node.left, k));
            }
            for (int k = node.k_b + 1; k <= n; ++k) vals(k - 1) = vals(node.k_b - 1);
        } else {
            const double entry = input_value(node.left, node.k_b);
            for (int k = node.k_b; k <= n; ++k) vals(k - 1) = entry;
            for (int k = node.k_b - 1; k >= node.k_a; --k) {
                vals(k - 1) = chi(node, vals(k), input_value(node.left, k));
            }
            for (int k = node.k_a - 1; k >= 1; --k) vals(k - 1) = vals(node.k_a - 1);
        }
        if (!vals.allFinite()) {
            throw std::runtime_error("propagate_reference: non-finite STL variable (NaN margin?)");
        }
    }
    return alpha;
}

ReferencePoint make_reference(const StlGraph& g, Trajectory traj, double kappa) {
    auto vars = propagate_reference(g, traj, kappa);
    return ReferencePoint{std::move(traj), std::move(vars)};
}

Eigen::RowVectorXd predicate_jacobian(const PredicateSpec& p, const Trajectory& traj, int k) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(kSignalWidth);
    switch (p.kind) {
        case PredicateKind::Affine:
            row(p.slice.offset + p.component) = 1.0;
            break;
        case PredicateKind::NormGeq:
        case PredicateKind::NormLeq: {
            const Eigen::VectorXd sig = traj.signal_at(p.slice, k);
            const double norm = sig.norm();
            if (norm > 0.0) {
                const double sign = p.kind == PredicateKind::NormGeq ? 1.0 : -1.0;
                row.segment(p.slice.offset, p.slice.size) = sign * sig.transpose() / norm;
            }
            // norm == 0: null gradient at the singular point
            break;
        }
    }
    return row;
}

Eigen::VectorXd LinearBlockSystem::stack(const ReferencePoint& ref) const {
    Eigen::VectorXd z(n_cols());
    for (int k = 1; k <= n_steps; ++k) {
        z.segment(x_col(k, 0), kSignalWidth) = ref.traj.stacked_at(k);
    }
    for (int node = 0; node < n_nodes; ++node) {
        z.segment(alpha_col(node, 1), n_steps) = ref.stl_vars[node];
    }
    return z;
}

namespace {

struct Assembler {
    const StlGraph& g;
    const ReferencePoint& ref;
    double kappa;
    std::vector<Eigen::Triplet<double>> triplets;
    LinearBlockSystem sys;

    Assembler(const StlGraph& g_, const ReferencePoint& ref_, double kappa_)
        : g(g_), ref(ref_), kappa(kappa_) {
        sys.n_steps = g.n_steps;
        sys.n_nodes = g.n_nodes();
        sys.rhs = Eigen::VectorXd::Zero(sys.n_rows());
    }

    double input_ref(const ParentRef& p, int k) const {
        return p.is_node ? ref.stl_vars[p.index](k - 1)
                         : signed_margin(g, p, ref.traj, k);
    }

    // Adds the coefficient columns of `weight * input_k` for an upstream
    // input at step k, and returns the reference value of the linearized
    // expression there (for the zero-order term).
    double add_input_columns(int row, const ParentRef& p, int k, double weight) {
        if (p.is_node) {
            triplets.emplace_back(row, sys.alpha_col(p.index, k), weight);
            return ref.stl_vars[p.index](k - 1);
        }
        const PredicateSpec& pred = g.predicates[p.index];
        Eigen::RowVectorXd jac = predicate_jacobian(pred, ref.traj, k);
        if (p.negated) jac = -jac;
        for (int j = 0; j < kSignalWidth; ++j) {
            if (jac(j) != 0.0) triplets.emplace_back(row, sys.x_col(k, j), weight * jac(j));
        }
        return signed_margin(g, p, ref.traj, k);
    }

    // Reference value of the x-dependent part of the input's linearization:
    // jac . x_ref for predicates, the parent variable itself for nodes.
    double input_linear_ref(const ParentRef& p, int k) const {
        if (p.is_node) return ref.stl_vars[p.index](k - 1);
        const PredicateSpec& pred = g.predicates[p.index];
        Eigen::RowVectorXd jac = predicate_jacobian(pred, ref.traj, k);
        if (p.negated) jac = -jac;
        return jac.dot(ref.traj.stacked_at(k));
    }

    SmoothGrad grad(const StlNode& node, double a, double b) const {
        return node.takes_min() ? smin_grad(a, b, kappa) : smax_grad(a, b, kappa);
    }
    double chi(const StlNode& node, double a, double b) const {
        return node.takes_min() ? smin(a, b, kappa) : smax(a, b, kappa);
    }

    // alpha_k pinned to the input's linearization at step k_pin:
    //   alpha_k - jac x_{k_pin} = mu_ref - jac x_ref   (predicate input)
    //   alpha_k - parent_{k_pin} = 0                   (node input)
    void emit_pin_row(const StlNode& node, int k, int k_pin) {
        const int row = sys.row_of(node.id, k);
        triplets.emplace_back(row, sys.alpha_col(node.id, k), 1.0);
        add_input_columns(row, node.left, k_pin, -1.0);
        sys.rhs(row) = input_ref(node.left, k_pin) - input_linear_ref(node.left, k_pin);
    }

    // In-window recursion row defining alpha at k_def from alpha at k_prev:
    //   -alpha_{k_def} + dchi/dalpha alpha_{k_prev} + dchi/drho (input at k_def) = -R
    void emit_recursion_row(const StlNode& node, int k_def, int k_prev) {
        const int row = sys.row_of(node.id, k_def);
        const double a_ref = ref.stl_vars[node.id](k_prev - 1);
        const double b_ref = input_ref(node.left, k_def);
        const SmoothGrad gr = grad(node, a_ref, b_ref);
        triplets.emplace_back(row, sys.alpha_col(node.id, k_def), -1.0);
        triplets.emplace_back(row, sys.alpha_col(node.id, k_prev), gr.da);
        add_input_columns(row, node.left, k_def, gr.db);
        const double zero_order =
            chi(node, a_ref, b_ref) - gr.da * a_ref - gr.db * input_linear_ref(node.left, k_def);
        sys.rhs(row) = -zero_order;
    }

    // Post-window hold chain: alpha_k - alpha_{k_from} = 0.
    void emit_hold_row(const StlNode& node, int k, int k_from) {
        const int row = sys.row_of(node.id, k);
        triplets.emplace_back(row, sys.alpha_col(node.id, k), 1.0);
        triplets.emplace_back(row, sys.alpha_col(node.id, k_from), -1.0);
        sys.rhs(row) = 0.0;
    }

    void emit_flow(const StlNode& node) {
        if (node.direction == Direction::Forward) {
            for (int k = 1; k <= node.k_a; ++k) emit_pin_row(node, k, node.k_a);
            for (int k = node.k_a + 1; k <= node.k_b; ++k) emit_recursion_row(node, k, k - 1);
            for (int k = node.k_b + 1; k <= g.n_steps; ++k) emit_hold_row(node, k, k - 1);
        } else {
            for (int k = node.k_b; k <= g.n_steps; ++k) emit_pin_row(node, k, node.k_b);
            for (int k = node.k_b - 1; k >= node.k_a; --k) emit_recursion_row(node, k, k + 1);
            for (int k = node.k_a - 1; k >= 1; --k) emit_hold_row(node, k, k + 1);
        }
    }

    // Pointwise bridge row:
    //   -gamma_k + dchi/dL (left at k) + dchi/dR (right at k) = -R
    void emit_bridge(const StlNode& node) {
        for (int k = 1; k <= g.n_steps; ++k) {
            const int row = sys.row_of(node.id, k);
            const double l_ref = input_ref(node.left, k);
            const double r_ref = input_ref(node.right, k);
            const SmoothGrad gr = grad(node, l_ref, r_ref);
            triplets.emplace_back(row, sys.alpha_col(node.id, k), -1.0);
            add_input_columns(row, node.left, k, gr.da);
            add_input_columns(row, node.right, k, gr.db);
            const double zero_order = chi(node, l_ref, r_ref) -
                                      gr.da * input_linear_ref(node.left, k) -
                                      gr.db * input_linear_ref(node.right, k);
            sys.rhs(row) = -zero_order;
        }
    }

    LinearBlockSystem build() {
        for (const StlNode& node : g.nodes) {
            if (node.is_bridge()) {
                emit_bridge(node);
            } else {
                emit_flow(node);
            }
        }
        sys.matrix.resize(sys.n_rows(), sys.n_cols());
        sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
        sys.matrix.makeCompressed();
        const StlNode& root = g.nodes[g.root];
        if (root.is_bridge() || root.direction != Direction::Forward) {
            throw std::logic_error("root node must be a forward Flow operator");
        }
        sys.terminal_col = sys.alpha_col(g.root, g.n_steps);
        return std::move(sys);
    }
};

}  // namespace

LinearBlockSystem assemble(const StlGraph& g, const ReferencePoint& ref, double kappa) {
    if (ref.traj.n_steps() != g.n_steps ||
        static_cast<int>(ref.stl_vars.size()) != g.n_nodes()) {
        throw std::invalid_argument("assemble: reference point / graph dimension mismatch");
    }
    Assembler assembler(g, ref, kappa);
    return assembler.build();
}

std::vector<std::pair<int, int>> realized_blocks(const LinearBlockSystem& sys) {
    std::set<std::pair<int, int>> blocks;
    const int x_cols = kSignalWidth * sys.n_steps;
    for (int outer = 0; outer < sys.matrix.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.matrix, outer); it; ++it) {
            if (it.value() == 0.0) continue;
            const int node = static_cast<int>(it.row()) / sys.n_steps;
            const int col = static_cast<int>(it.col());
            const int block = col < x_cols ? -1 : (col - x_cols) / sys.n_steps;
            blocks.insert({node, block});
        }
    }
    return {blocks.begin(), blocks.end()};
}

void write_coordinate_format(std::ostream& out, const LinearBlockSystem& sys) {
    out << "# rows " << sys.n_rows() << " cols " << sys.n_cols() << " rhs-appended\n";
    out.precision(17);
    for (int outer = 0; outer < sys.matrix.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.matrix, outer); it; ++it) {
            out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
        }
    }
    for (int i = 0; i < sys.rhs.size(); ++i) {
        out << "b " << i << ' ' << sys.rhs(i) << '\n';
    }
}

nlohmann::json layout_json(const StlGraph& g, const LinearBlockSystem& sys) {
    nlohmann::json j;
    j["n_steps"] = sys.n_steps;
    j["signal_width"] = kSignalWidth;
    j["x_cols"] = {0, kSignalWidth * sys.n_steps};
    nlohmann::json vars = nlohmann::json::array();
    for (const StlNode& node : g.nodes) {
        nlohmann::json vj;
        vj["node"] = node.id;
        vj["op"] = node_op_name(node.op);
        const int base = sys.alpha_col(node.id, 1);
        vj["cols"] = {base, base + sys.n_steps};
        vj["rows"] = {sys.row_of(node.id, 1), sys.row_of(node.id, sys.n_steps) + 1};
        vars.push_back(vj);
    }
    j["stl_variables"] = vars;
    j["terminal_inequality"] = {{"col", sys.terminal_col}, {"sense", ">=0"}};
    return j;
}

}  // namespace stlcvx
