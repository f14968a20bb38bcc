#include "stlcvx/formula.hpp"

#include <cassert>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

namespace stlcvx {

namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string PredicateSpec::label() const {
    std::ostringstream os;
    switch (kind) {
        case PredicateKind::Affine:
            os << signal << '[' << component << "] >= " << format_double(threshold);
            break;
        case PredicateKind::NormGeq:
            os << "norm(" << signal << ") >= " << format_double(threshold);
            break;
        case PredicateKind::NormLeq:
            os << "norm(" << signal << ") <= " << format_double(threshold);
            break;
    }
    return os.str();
}

int Interval::resolve_lo(int n_steps) const {
    return 1 + static_cast<int>(std::llround(a * (n_steps - 1)));
}

int Interval::resolve_hi(int n_steps) const {
    return 1 + static_cast<int>(std::llround(b * (n_steps - 1)));
}

const char* connective_name(Connective c) {
    switch (c) {
        case Connective::Predicate: return "predicate";
        case Connective::Not: return "not";
        case Connective::And: return "and";
        case Connective::Or: return "or";
        case Connective::Eventually: return "eventually";
        case Connective::Always: return "always";
        case Connective::Until: return "until";
        case Connective::Implies: return "implies";
        case Connective::Iff: return "iff";
        case Connective::Xor: return "xor";
    }
    return "?";
}

FormulaPtr Formula::predicate(PredicateSpec p) {
    auto f = std::make_shared<Formula>();
    f->kind = Connective::Predicate;
    f->pred = std::move(p);
    return f;
}

FormulaPtr Formula::negation(FormulaPtr child) {
    auto f = std::make_shared<Formula>();
    f->kind = Connective::Not;
    f->left = std::move(child);
    return f;
}

FormulaPtr Formula::binary(Connective kind, FormulaPtr l, FormulaPtr r) {
    auto f = std::make_shared<Formula>();
    f->kind = kind;
    f->left = std::move(l);
    f->right = std::move(r);
    return f;
}

FormulaPtr Formula::temporal(Connective kind, Interval w, FormulaPtr child,
                             TemporalInterest interest) {
    auto f = std::make_shared<Formula>();
    f->kind = kind;
    f->window = w;
    f->interest = interest;
    f->left = std::move(child);
    return f;
}

bool structurally_equal(const Formula& a, const Formula& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Connective::Predicate:
            return a.pred.kind == b.pred.kind && a.pred.signal == b.pred.signal &&
                   a.pred.component == b.pred.component && a.pred.threshold == b.pred.threshold;
        case Connective::Not:
            return structurally_equal(*a.left, *b.left);
        case Connective::Eventually:
        case Connective::Always:
            return a.window.a == b.window.a && a.window.b == b.window.b &&
                   a.interest == b.interest && structurally_equal(*a.left, *b.left);
        default:
            return structurally_equal(*a.left, *b.left) && structurally_equal(*a.right, *b.right);
    }
}

FormulaPtr deep_clone(const Formula& f) {
    auto copy = std::make_shared<Formula>();
    copy->kind = f.kind;
    copy->pred = f.pred;
    copy->window = f.window;
    copy->interest = f.interest;
    if (f.left) copy->left = deep_clone(*f.left);
    if (f.right) copy->right = deep_clone(*f.right);
    return copy;
}

ParseError::ParseError(const std::string& msg, int line_, int column_)
    : std::runtime_error("parse error at " + std::to_string(line_) + ":" +
                         std::to_string(column_) + ": " + msg),
      line(line_),
      column(column_) {}

TopNodeNotFlowError::TopNodeNotFlowError(Connective c)
    : std::runtime_error(std::string("top node must be a Flow operator (always/eventually), got '") +
                         connective_name(c) + "'"),
      offending(c) {}

// ---------------------------------------------------------------------------
// Lexer / parser

namespace {

enum class TokType { Ident, Number, LParen, RParen, LBracket, RBracket, Comma, GEq, LEq, Caret, End };

struct Token {
    TokType type = TokType::End;
    std::string text;
    double number = 0.0;
    int line = 1;
    int column = 1;
};

class Lexer {
  public:
    explicit Lexer(const std::string& text) : text_(text) { advance(); }

    const Token& peek() const { return current_; }

    Token take() {
        Token t = current_;
        advance();
        return t;
    }

  private:
    void advance() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            if (text_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
            ++pos_;
        }
        current_.line = line_;
        current_.column = col_;
        if (pos_ >= text_.size()) {
            current_.type = TokType::End;
            current_.text = "<end>";
            return;
        }
        const char c = text_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
                ++col_;
            }
            current_.type = TokType::Ident;
            current_.text = text_.substr(start, pos_ - start);
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
            if (c == '+') {  // from_chars rejects an explicit plus sign
                ++pos_;
                ++col_;
            }
            const char* begin = text_.data() + pos_;
            const char* end = text_.data() + text_.size();
            double value = 0.0;
            auto res = std::from_chars(begin, end, value);
            if (res.ec != std::errc() || res.ptr == begin) {
                throw ParseError("malformed number", line_, col_);
            }
            size_t len = static_cast<size_t>(res.ptr - begin);
            current_.type = TokType::Number;
            current_.text = text_.substr(pos_, len);
            current_.number = value;
            pos_ += len;
            col_ += static_cast<int>(len);
            return;
        }
        auto single = [&](TokType t) {
            current_.type = t;
            current_.text = std::string(1, c);
            ++pos_;
            ++col_;
        };
        switch (c) {
            case '(': single(TokType::LParen); return;
            case ')': single(TokType::RParen); return;
            case '[': single(TokType::LBracket); return;
            case ']': single(TokType::RBracket); return;
            case ',': single(TokType::Comma); return;
            case '^': single(TokType::Caret); return;
            case '>':
            case '<': {
                if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '=') {
                    current_.type = (c == '>') ? TokType::GEq : TokType::LEq;
                    current_.text = std::string(1, c) + "=";
                    pos_ += 2;
                    col_ += 2;
                    return;
                }
                throw ParseError(std::string("expected '") + c + "='", line_, col_);
            }
            default:
                throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
        }
    }

    const std::string& text_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    Token current_;
};

class Parser {
  public:
    explicit Parser(const std::string& text) : lex_(text) {}

    FormulaPtr parse() {
        FormulaPtr f = parse_iff();
        const Token& t = lex_.peek();
        if (t.type != TokType::End) {
            throw ParseError("unexpected trailing input '" + t.text + "'", t.line, t.column);
        }
        return f;
    }

  private:
    bool peek_keyword(const char* kw) const {
        return lex_.peek().type == TokType::Ident && lex_.peek().text == kw;
    }

    Token expect(TokType type, const char* what) {
        const Token& t = lex_.peek();
        if (t.type != type) {
            throw ParseError(std::string("expected ") + what + ", got '" + t.text + "'", t.line,
                             t.column);
        }
        return lex_.take();
    }

    FormulaPtr parse_iff() {
        FormulaPtr l = parse_implies();
        while (peek_keyword("iff") || peek_keyword("xor")) {
            Connective op = peek_keyword("iff") ? Connective::Iff : Connective::Xor;
            lex_.take();
            l = Formula::binary(op, l, parse_implies());
        }
        return l;
    }

    FormulaPtr parse_implies() {
        FormulaPtr l = parse_until();
        if (peek_keyword("implies")) {
            lex_.take();
            return Formula::binary(Connective::Implies, l, parse_implies());
        }
        return l;
    }

    FormulaPtr parse_until() {
        FormulaPtr l = parse_or();
        while (peek_keyword("until")) {
            lex_.take();
            l = Formula::binary(Connective::Until, l, parse_or());
        }
        return l;
    }

    FormulaPtr parse_or() {
        FormulaPtr l = parse_and();
        while (peek_keyword("or")) {
            lex_.take();
            l = Formula::binary(Connective::Or, l, parse_and());
        }
        return l;
    }

    FormulaPtr parse_and() {
        FormulaPtr l = parse_unary();
        while (peek_keyword("and")) {
            lex_.take();
            l = Formula::binary(Connective::And, l, parse_unary());
        }
        return l;
    }

    FormulaPtr parse_unary() {
        if (peek_keyword("not")) {
            lex_.take();
            return Formula::negation(parse_unary());
        }
        if (peek_keyword("always") || peek_keyword("eventually")) {
            Connective op = peek_keyword("always") ? Connective::Always : Connective::Eventually;
            lex_.take();
            TemporalInterest interest = TemporalInterest::Before;
            if (lex_.peek().type == TokType::Caret) {
                lex_.take();
                Token t = expect(TokType::Ident, "interest 'A' or 'B' after '^'");
                if (t.text == "A") {
                    interest = TemporalInterest::After;
                } else if (t.text == "B") {
                    interest = TemporalInterest::Before;
                } else {
                    throw ParseError("interest suffix must be 'A' or 'B', got '" + t.text + "'",
                                     t.line, t.column);
                }
            }
            Interval w;
            if (lex_.peek().type == TokType::LBracket) {
                w = parse_interval();
            }
            return Formula::temporal(op, w, parse_unary(), interest);
        }
        return parse_primary();
    }

    Interval parse_interval() {
        expect(TokType::LBracket, "'['");
        Token ta = expect(TokType::Number, "window start");
        expect(TokType::Comma, "','");
        Token tb = expect(TokType::Number, "window end");
        Token close = expect(TokType::RBracket, "']'");
        Interval w{ta.number, tb.number};
        if (!(w.a >= 0.0 && w.a <= 1.0 && w.b >= 0.0 && w.b <= 1.0)) {
            throw ParseError("window bounds must lie in [0,1]", ta.line, ta.column);
        }
        if (w.a > w.b) {
            throw ParseError("malformed interval: start " + format_double(w.a) +
                                 " exceeds end " + format_double(w.b),
                             close.line, close.column);
        }
        return w;
    }

    FormulaPtr parse_primary() {
        const Token& t = lex_.peek();
        if (t.type == TokType::LParen) {
            lex_.take();
            FormulaPtr inner = parse_iff();
            expect(TokType::RParen, "')'");
            return inner;
        }
        if (t.type == TokType::Ident && t.text == "norm") {
            lex_.take();
            expect(TokType::LParen, "'('");
            Token sig = expect(TokType::Ident, "signal name");
            expect(TokType::RParen, "')'");
            PredicateSpec p;
            p.signal = sig.text;
            try {
                p.slice = resolve_signal(sig.text);
            } catch (const std::invalid_argument& e) {
                throw ParseError(e.what(), sig.line, sig.column);
            }
            const Token& cmp = lex_.peek();
            if (cmp.type == TokType::GEq) {
                p.kind = PredicateKind::NormGeq;
            } else if (cmp.type == TokType::LEq) {
                p.kind = PredicateKind::NormLeq;
            } else {
                throw ParseError("expected '>=' or '<=' after norm(...)", cmp.line, cmp.column);
            }
            lex_.take();
            Token thr = expect(TokType::Number, "threshold");
            p.threshold = thr.number;
            if (!std::isfinite(p.threshold)) {
                throw ParseError("threshold must be finite", thr.line, thr.column);
            }
            return Formula::predicate(std::move(p));
        }
        if (t.type == TokType::Ident) {
            Token sig = lex_.take();
            PredicateSpec p;
            p.kind = PredicateKind::Affine;
            p.signal = sig.text;
            try {
                p.slice = resolve_signal(sig.text);
            } catch (const std::invalid_argument& e) {
                throw ParseError(e.what(), sig.line, sig.column);
            }
            expect(TokType::LBracket, "'['");
            Token idx = expect(TokType::Number, "component index");
            expect(TokType::RBracket, "']'");
            const double ival = idx.number;
            if (ival != std::floor(ival) || ival < 0 || ival >= p.slice.size) {
                throw ParseError("component index out of range for signal '" + p.signal + "'",
                                 idx.line, idx.column);
            }
            p.component = static_cast<int>(ival);
            expect(TokType::GEq, "'>='");
            Token thr = expect(TokType::Number, "threshold");
            p.threshold = thr.number;
            if (!std::isfinite(p.threshold)) {
                throw ParseError("threshold must be finite", thr.line, thr.column);
            }
            return Formula::predicate(std::move(p));
        }
        throw ParseError("expected a formula, got '" + t.text + "'", t.line, t.column);
    }

    Lexer lex_;
};

// Printing levels mirror the parser's precedence ladder.
int precedence(Connective c) {
    switch (c) {
        case Connective::Iff:
        case Connective::Xor: return 1;
        case Connective::Implies: return 2;
        case Connective::Until: return 3;
        case Connective::Or: return 4;
        case Connective::And: return 5;
        default: return 6;  // unary and atoms
    }
}

void print_rec(const Formula& f, std::ostream& os) {
    auto child = [&](const Formula& c) {
        if (c.kind == Connective::Predicate) {
            print_rec(c, os);
        } else {
            os << '(';
            print_rec(c, os);
            os << ')';
        }
    };
    switch (f.kind) {
        case Connective::Predicate:
            os << f.pred.label();
            return;
        case Connective::Not:
            os << "not ";
            child(*f.left);
            return;
        case Connective::Always:
        case Connective::Eventually:
            os << (f.kind == Connective::Always ? "always" : "eventually");
            if (f.interest == TemporalInterest::After) os << "^A";
            if (!f.window.is_full()) {
                os << '[' << format_double(f.window.a) << ',' << format_double(f.window.b) << ']';
            }
            os << ' ';
            child(*f.left);
            return;
        default: {
            // Binary connectives print fully parenthesized operands.
            auto side = [&](const Formula& c) {
                if (c.kind == Connective::Predicate ||
                    precedence(c.kind) > precedence(f.kind)) {
                    print_rec(c, os);
                } else {
                    os << '(';
                    print_rec(c, os);
                    os << ')';
                }
            };
            side(*f.left);
            os << ' ' << connective_name(f.kind) << ' ';
            side(*f.right);
            return;
        }
    }
}

FormulaPtr push_not(const FormulaPtr& g);

FormulaPtr desugar_rec(const FormulaPtr& f) {
    switch (f->kind) {
        case Connective::Predicate:
            return f;
        case Connective::Not:
            return push_not(desugar_rec(f->left));
        case Connective::And:
        case Connective::Or:
            return Formula::binary(f->kind, desugar_rec(f->left), desugar_rec(f->right));
        case Connective::Eventually:
        case Connective::Always:
            return Formula::temporal(f->kind, f->window, desugar_rec(f->left), f->interest);
        case Connective::Implies: {
            auto l = desugar_rec(f->left);
            auto r = desugar_rec(f->right);
            return Formula::binary(Connective::Or, push_not(l), r);
        }
        case Connective::Iff: {
            auto l = desugar_rec(f->left);
            auto r = desugar_rec(f->right);
            auto fwd = Formula::binary(Connective::Or, push_not(l), deep_clone(*r));
            auto bwd = Formula::binary(Connective::Or, push_not(r), deep_clone(*l));
            return Formula::binary(Connective::And, fwd, bwd);
        }
        case Connective::Xor: {
            auto l = desugar_rec(f->left);
            auto r = desugar_rec(f->right);
            auto both = Formula::binary(Connective::And, deep_clone(*l), push_not(r));
            auto neither = Formula::binary(Connective::And, push_not(l), deep_clone(*r));
            return Formula::binary(Connective::Or, both, neither);
        }
        case Connective::Until: {
            // p until q  ==  eventually (q and always^B p), full-horizon windows.
            auto p = desugar_rec(f->left);
            auto q = desugar_rec(f->right);
            auto history = Formula::temporal(Connective::Always, Interval{0.0, 1.0}, p,
                                             TemporalInterest::Before);
            auto trigger = Formula::binary(Connective::And, q, history);
            return Formula::temporal(Connective::Eventually, Interval{0.0, 1.0}, trigger,
                                     TemporalInterest::Before);
        }
    }
    throw std::logic_error("unreachable connective in desugar");
}

// Negation of an already-core formula: De Morgan through the bridges and
// eventually/always duality through the flows; interest is preserved.
FormulaPtr push_not(const FormulaPtr& g) {
    switch (g->kind) {
        case Connective::Predicate:
            return Formula::negation(g);
        case Connective::Not:
            return g->left;  // double negation
        case Connective::And:
            return Formula::binary(Connective::Or, push_not(g->left), push_not(g->right));
        case Connective::Or:
            return Formula::binary(Connective::And, push_not(g->left), push_not(g->right));
        case Connective::Eventually:
            return Formula::temporal(Connective::Always, g->window, push_not(g->left), g->interest);
        case Connective::Always:
            return Formula::temporal(Connective::Eventually, g->window, push_not(g->left),
                                     g->interest);
        default:
            throw std::logic_error("push_not applied to non-core formula");
    }
}

}  // namespace

FormulaPtr parse_formula(const std::string& text) {
    Parser parser(text);
    return parser.parse();
}

std::string print_formula(const Formula& f) {
    std::ostringstream os;
    print_rec(f, os);
    return os.str();
}

FormulaPtr desugar(const FormulaPtr& f) {
    if (!f) throw std::invalid_argument("desugar: null formula");
    return desugar_rec(f);
}

bool is_core(const Formula& f) {
    switch (f.kind) {
        case Connective::Predicate:
            return true;
        case Connective::Not:
            return f.left && f.left->kind == Connective::Predicate;
        case Connective::And:
        case Connective::Or:
            return is_core(*f.left) && is_core(*f.right);
        case Connective::Eventually:
        case Connective::Always:
            return is_core(*f.left);
        default:
            return false;
    }
}

void validate_top(const Formula& core) {
    if (core.kind != Connective::Always && core.kind != Connective::Eventually) {
        throw TopNodeNotFlowError(core.kind);
    }
}

}  // namespace stlcvx
