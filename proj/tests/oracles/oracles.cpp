#include "oracles/oracles.hpp"

#include <algorithm>
#include <stdexcept>

namespace stlcvx::oracles {

std::vector<double> running_extremum(const std::vector<double>& values, ScanKind kind) {
    std::vector<double> out(values.size());
    for (size_t i = 0; i < values.size(); ++i) {
        if (i == 0) {
            out[i] = values[i];
        } else {
            out[i] = kind == ScanKind::Min ? std::min(out[i - 1], values[i])
                                           : std::max(out[i - 1], values[i]);
        }
    }
    return out;
}

namespace {

int clamp_step(int k, int lo, int hi) { return std::min(hi, std::max(lo, k)); }

}  // namespace

bool quantifier_sat_at(const Formula& f, const MarginFn& margins, int n_steps, int k) {
    switch (f.kind) {
        case Connective::Predicate:
            return margins(f.pred, k) > 0.0;
        case Connective::Not:
            return !quantifier_sat_at(*f.left, margins, n_steps, k);
        case Connective::And:
            return quantifier_sat_at(*f.left, margins, n_steps, k) &&
                   quantifier_sat_at(*f.right, margins, n_steps, k);
        case Connective::Or:
            return quantifier_sat_at(*f.left, margins, n_steps, k) ||
                   quantifier_sat_at(*f.right, margins, n_steps, k);
        case Connective::Implies:
            return !quantifier_sat_at(*f.left, margins, n_steps, k) ||
                   quantifier_sat_at(*f.right, margins, n_steps, k);
        case Connective::Iff:
            return quantifier_sat_at(*f.left, margins, n_steps, k) ==
                   quantifier_sat_at(*f.right, margins, n_steps, k);
        case Connective::Xor:
            return quantifier_sat_at(*f.left, margins, n_steps, k) !=
                   quantifier_sat_at(*f.right, margins, n_steps, k);
        case Connective::Until: {
            // Some trigger step j <= k satisfies the right side while the
            // left side held on every step up to j.
            for (int j = 1; j <= k; ++j) {
                if (!quantifier_sat_at(*f.right, margins, n_steps, j)) continue;
                bool history = true;
                for (int i = 1; i <= j && history; ++i) {
                    history = quantifier_sat_at(*f.left, margins, n_steps, i);
                }
                if (history) return true;
            }
            return false;
        }
        case Connective::Eventually:
        case Connective::Always: {
            const int ka = f.window.resolve_lo(n_steps);
            const int kb = f.window.resolve_hi(n_steps);
            int lo, hi;
            if (f.interest == TemporalInterest::Before) {
                lo = ka;
                hi = clamp_step(k, ka, kb);
            } else {
                lo = clamp_step(k, ka, kb);
                hi = kb;
            }
            const bool exists = f.kind == Connective::Eventually;
            for (int j = lo; j <= hi; ++j) {
                const bool v = quantifier_sat_at(*f.left, margins, n_steps, j);
                if (exists && v) return true;
                if (!exists && !v) return false;
            }
            return !exists;
        }
    }
    throw std::logic_error("unreachable connective");
}

bool quantifier_eval(const Formula& f, const MarginFn& margins, int n_steps) {
    const bool after = (f.kind == Connective::Always || f.kind == Connective::Eventually) &&
                       f.interest == TemporalInterest::After;
    return quantifier_sat_at(f, margins, n_steps, after ? 1 : n_steps);
}

double finite_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x, double h) {
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd probe = x;
    for (int i = 0; i < x.size(); ++i) {
        probe(i) = x(i) + h;
        const double hi = f(probe);
        probe(i) = x(i) - h;
        const double lo = f(probe);
        probe(i) = x(i);
        grad(i) = (hi - lo) / (2.0 * h);
    }
    return grad;
}

Eigen::MatrixXd rk4_cw(const Eigen::Matrix<double, 6, 1>& x0, const Eigen::MatrixXd& controls,
                       double dt, double mean_motion, double mass, int substeps) {
    const int n = static_cast<int>(controls.cols());
    const double w = mean_motion;
    auto rhs = [&](const Eigen::Matrix<double, 6, 1>& x,
                   const Eigen::Vector3d& a) -> Eigen::Matrix<double, 6, 1> {
        Eigen::Matrix<double, 6, 1> dx;
        dx(0) = x(3);
        dx(1) = x(4);
        dx(2) = x(5);
        dx(3) = 3.0 * w * w * x(0) + 2.0 * w * x(4) + a(0);
        dx(4) = -2.0 * w * x(3) + a(1);
        dx(5) = -w * w * x(2) + a(2);
        return dx;
    };
    Eigen::MatrixXd states(6, n);
    states.col(0) = x0;
    const double h = dt / substeps;
    for (int k = 0; k + 1 < n; ++k) {
        Eigen::Matrix<double, 6, 1> x = states.col(k);
        const Eigen::Vector3d a = controls.col(k) / mass;
        for (int s = 0; s < substeps; ++s) {
            const auto k1 = rhs(x, a);
            const auto k2 = rhs(x + 0.5 * h * k1, a);
            const auto k3 = rhs(x + 0.5 * h * k2, a);
            const auto k4 = rhs(x + h * k3, a);
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        states.col(k + 1) = x;
    }
    return states;
}

std::vector<PredicateSpec> margin_predicates(int count) {
    if (count < 1 || count > 6) throw std::invalid_argument("need 1..6 margin predicates");
    std::vector<PredicateSpec> preds;
    for (int i = 0; i < count; ++i) {
        PredicateSpec p;
        p.kind = PredicateKind::Affine;
        p.signal = i < 3 ? "r" : "v";
        p.slice = resolve_signal(p.signal);
        p.component = i % 3;
        p.threshold = 0.0;
        preds.push_back(p);
    }
    return preds;
}

namespace {

FormulaPtr gen(std::mt19937& rng, const FormulaGenOptions& opt,
               const std::vector<PredicateSpec>& preds, int depth) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto pick_pred = [&]() {
        std::uniform_int_distribution<size_t> pick(0, preds.size() - 1);
        FormulaPtr leaf = Formula::predicate(preds[pick(rng)]);
        if (unit(rng) < 0.3) leaf = Formula::negation(leaf);
        return leaf;
    };
    if (depth <= 0 || unit(rng) < 0.2) return pick_pred();

    auto window = [&]() {
        double a = unit(rng), b = unit(rng);
        if (a > b) std::swap(a, b);
        if (unit(rng) < 0.3) {  // bias toward full horizon
            a = 0.0;
            b = 1.0;
        }
        return Interval{a, b};
    };
    auto interest = [&]() {
        return opt.allow_after && unit(rng) < 0.5 ? TemporalInterest::After
                                                  : TemporalInterest::Before;
    };

    const int n_kinds = opt.allow_derived ? 9 : 5;
    std::uniform_int_distribution<int> pick_kind(0, n_kinds - 1);
    switch (pick_kind(rng)) {
        case 0:
            return Formula::binary(Connective::And, gen(rng, opt, preds, depth - 1),
                                   gen(rng, opt, preds, depth - 1));
        case 1:
            return Formula::binary(Connective::Or, gen(rng, opt, preds, depth - 1),
                                   gen(rng, opt, preds, depth - 1));
        case 2:
            return Formula::temporal(Connective::Eventually, window(),
                                     gen(rng, opt, preds, depth - 1), interest());
        case 3:
            return Formula::temporal(Connective::Always, window(),
                                     gen(rng, opt, preds, depth - 1), interest());
        case 4:
            return pick_pred();
        case 5:
            return Formula::binary(Connective::Implies, gen(rng, opt, preds, depth - 1),
                                   gen(rng, opt, preds, depth - 1));
        case 6:
            return Formula::binary(Connective::Iff, gen(rng, opt, preds, depth - 1),
                                   gen(rng, opt, preds, depth - 1));
        case 7:
            return Formula::binary(Connective::Xor, gen(rng, opt, preds, depth - 1),
                                   gen(rng, opt, preds, depth - 1));
        default:
            return Formula::binary(Connective::Until, gen(rng, opt, preds, depth - 1),
                                   gen(rng, opt, preds, depth - 1));
    }
}

}  // namespace

FormulaPtr random_formula(std::mt19937& rng, const FormulaGenOptions& opt) {
    const auto preds = margin_predicates(opt.n_predicates);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (!opt.flow_root) return gen(rng, opt, preds, opt.max_depth);
    double a = unit(rng), b = unit(rng);
    if (a > b) std::swap(a, b);
    if (unit(rng) < 0.3) {
        a = 0.0;
        b = 1.0;
    }
    const Connective root = unit(rng) < 0.5 ? Connective::Always : Connective::Eventually;
    return Formula::temporal(root, Interval{a, b}, gen(rng, opt, preds, opt.max_depth - 1),
                             TemporalInterest::Before);
}

}  // namespace stlcvx::oracles
