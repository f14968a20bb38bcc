#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "stlcvx/trajectory.hpp"

namespace stlcvx {

// STL mission-constraint formulas: a textual DSL parsed into an immutable
// AST, then desugared into the core operator set {Predicate, Not-over-
// Predicate, And, Or, Eventually, Always} before graph compilation.
//
// Grammar (loosest to tightest binding):
//   iff | xor            left associative
//   implies              right associative
//   until                left associative
//   or
//   and
//   not / always / eventually   (prefix; temporal operators take an optional
//                                ^A or ^B interest suffix and an optional
//                                [a,b] window, defaulting to [0,1])
//   predicates: norm(sig) >= c | norm(sig) <= c | sig[i] >= c
// Window bounds are fractions of the horizon in [0,1].

enum class PredicateKind { Affine, NormGeq, NormLeq };

struct PredicateSpec {
    PredicateKind kind = PredicateKind::Affine;
    std::string signal;
    SignalSlice slice;  // resolved against signal_registry()
    int component = 0;  // Affine only
    double threshold = 0.0;

    std::string label() const;
};

// Fraction-of-horizon time window. Grid resolution maps a fraction f to the
// 1-based index 1 + round(f * (N-1)), endpoint-exact for f in {0, 1}.
struct Interval {
    double a = 0.0;
    double b = 1.0;

    bool is_full() const { return a == 0.0 && b == 1.0; }
    int resolve_lo(int n_steps) const;
    int resolve_hi(int n_steps) const;
};

enum class TemporalInterest { Before, After };

enum class Connective { Predicate, Not, And, Or, Eventually, Always, Until, Implies, Iff, Xor };

const char* connective_name(Connective c);

class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

class Formula {
  public:
    Connective kind = Connective::Predicate;
    PredicateSpec pred;                                  // Predicate only
    Interval window;                                     // Eventually / Always
    TemporalInterest interest = TemporalInterest::Before;  // Eventually / Always
    FormulaPtr left;   // unary operators use left only
    FormulaPtr right;

    static FormulaPtr predicate(PredicateSpec p);
    static FormulaPtr negation(FormulaPtr f);
    static FormulaPtr binary(Connective kind, FormulaPtr l, FormulaPtr r);
    static FormulaPtr temporal(Connective kind, Interval w, FormulaPtr child,
                               TemporalInterest interest = TemporalInterest::Before);
};

bool structurally_equal(const Formula& a, const Formula& b);
FormulaPtr deep_clone(const Formula& f);

struct ParseError : std::runtime_error {
    int line = 0;
    int column = 0;
    ParseError(const std::string& msg, int line_, int column_);
};

struct TopNodeNotFlowError : std::runtime_error {
    Connective offending;
    explicit TopNodeNotFlowError(Connective c);
};

FormulaPtr parse_formula(const std::string& text);
std::string print_formula(const Formula& f);

// Rewrites derived operators into the core set and pushes negation down to
// the predicates:
//   implies(p, q)  -> or(not p, q)
//   iff(p, q)      -> and(or(not p, q), or(not q, p))
//   xor(p, q)      -> or(and(p, not q), and(not p, q))
//   until(p, q)    -> eventually(and(q, always^B p))     (full-horizon windows)
// Idempotent on core-form input.
FormulaPtr desugar(const FormulaPtr& f);

bool is_core(const Formula& f);

// The compilation root must be a Flow operator (Always or Eventually);
// throws TopNodeNotFlowError otherwise. Expects core form.
void validate_top(const Formula& core);

}  // namespace stlcvx
