#include "stlcvx/semantics.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace stlcvx {

double predicate_margin(const PredicateSpec& p, const Trajectory& traj, int k) {
    if (k < 1 || k > traj.n_steps()) {
        throw std::out_of_range("predicate_margin: step index out of range");
    }
    const Eigen::VectorXd sig = traj.signal_at(p.slice, k);
    switch (p.kind) {
        case PredicateKind::Affine:
            return sig(p.component) - p.threshold;
        case PredicateKind::NormGeq:
            return sig.norm() - p.threshold;
        case PredicateKind::NormLeq:
            return p.threshold - sig.norm();
    }
    throw std::logic_error("unreachable predicate kind");
}

namespace {

struct Evaluator {
    const Trajectory& traj;
    std::vector<NodeTrace>& nodes;
    int n;

    Eigen::VectorXd eval(const Formula& f) {
        switch (f.kind) {
            case Connective::Predicate: {
                Eigen::VectorXd trace(n);
                for (int k = 1; k <= n; ++k) trace(k - 1) = predicate_margin(f.pred, traj, k);
                return trace;
            }
            case Connective::Not: {
                if (!f.left || f.left->kind != Connective::Predicate) {
                    throw std::invalid_argument("eval_exact expects core form (not above predicate only)");
                }
                return -eval(*f.left);
            }
            case Connective::And:
            case Connective::Or: {
                Eigen::VectorXd l = eval(*f.left);
                Eigen::VectorXd r = eval(*f.right);
                Eigen::VectorXd trace =
                    (f.kind == Connective::And) ? l.cwiseMin(r) : l.cwiseMax(r);
                push_node(f, trace);
                return trace;
            }
            case Connective::Eventually:
            case Connective::Always: {
                Eigen::VectorXd child = eval(*f.left);
                Eigen::VectorXd trace = flow_trace(f, child);
                push_node(f, trace);
                return trace;
            }
            default:
                throw std::invalid_argument("eval_exact expects core form, got derived operator");
        }
    }

    Eigen::VectorXd flow_trace(const Formula& f, const Eigen::VectorXd& child) const {
        const int ka = f.window.resolve_lo(n);
        const int kb = f.window.resolve_hi(n);
        if (ka < 1 || kb > n || ka > kb) {
            throw std::invalid_argument("empty window after grid resolution");
        }
        const bool take_min = f.kind == Connective::Always;
        auto ext = [&](double a, double b) { return take_min ? std::min(a, b) : std::max(a, b); };
        Eigen::VectorXd trace(n);
        if (f.interest == TemporalInterest::Before) {
            // Running extremum over [k_a, clamp(k)], held before and after.
            double acc = child(ka - 1);
            for (int k = 1; k <= n; ++k) {
                if (k > ka && k <= kb) acc = ext(acc, child(k - 1));
                trace(k - 1) = acc;
            }
        } else {
            double acc = child(kb - 1);
            for (int k = n; k >= 1; --k) {
                if (k < kb && k >= ka) acc = ext(acc, child(k - 1));
                trace(k - 1) = acc;
            }
        }
        return trace;
    }

    void push_node(const Formula& f, const Eigen::VectorXd& trace) {
        std::ostringstream label;
        label << connective_name(f.kind);
        if (f.kind == Connective::Always || f.kind == Connective::Eventually) {
            if (f.interest == TemporalInterest::After) label << "^A";
            if (!f.window.is_full()) label << '[' << f.window.a << ',' << f.window.b << ']';
        }
        label << " #" << nodes.size();
        nodes.push_back({label.str(), trace});
    }
};

}  // namespace

ExactEvaluation eval_exact(const Formula& core, const Trajectory& traj) {
    traj.validate();
    ExactEvaluation result;
    Evaluator ev{traj, result.nodes, traj.n_steps()};
    Eigen::VectorXd root_trace = ev.eval(core);
    const int n = traj.n_steps();
    // The clamped running extremum equals the full-window aggregate at the
    // trailing end for Before interest and at the leading end for After, so
    // the root margin is direction independent as an aggregate.
    const bool after = (core.kind == Connective::Always || core.kind == Connective::Eventually) &&
                       core.interest == TemporalInterest::After;
    result.root_margin = after ? root_trace(0) : root_trace(n - 1);
    return result;
}

bool eval_boolean(const Formula& core, const Trajectory& traj) {
    return eval_exact(core, traj).root_margin > 0.0;
}

}  // namespace stlcvx
