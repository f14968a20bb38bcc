#include "stlcvx/graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace stlcvx {

const char* node_op_name(NodeOp op) {
    switch (op) {
        case NodeOp::And: return "and";
        case NodeOp::Or: return "or";
        case NodeOp::Always: return "always";
        case NodeOp::Eventually: return "eventually";
    }
    return "?";
}

namespace {

struct PendingNode {
    const Formula* formula = nullptr;
    int depth = 0;
    int dfs_index = 0;
};

struct Builder {
    int n_steps;
    int max_depth;
    std::vector<PendingNode> pending;
    std::vector<PredicateSpec> predicates;
    int dfs_counter = 0;

    void collect(const Formula& f, int depth) {
        if (depth > max_depth) {
            throw std::invalid_argument("formula nesting exceeds depth limit " +
                                        std::to_string(max_depth));
        }
        switch (f.kind) {
            case Connective::Predicate:
            case Connective::Not:
                return;  // leaves; predicate ids assigned during wiring
            case Connective::And:
            case Connective::Or:
                pending.push_back({&f, depth, dfs_counter++});
                collect(*f.left, depth + 1);
                collect(*f.right, depth + 1);
                return;
            case Connective::Always:
            case Connective::Eventually:
                pending.push_back({&f, depth, dfs_counter++});
                collect(*f.left, depth + 1);
                return;
            default:
                throw std::invalid_argument("compile expects core form, found derived operator '" +
                                            std::string(connective_name(f.kind)) + "'");
        }
    }
};

}  // namespace

StlGraph compile(const FormulaPtr& core, int n_steps, int max_depth) {
    if (!core) throw std::invalid_argument("compile: null formula");
    if (n_steps < 2) throw std::invalid_argument("compile: need at least 2 grid points");
    if (!is_core(*core)) throw std::invalid_argument("compile expects a desugared (core) formula");
    validate_top(*core);

    Builder builder{n_steps, max_depth, {}, {}, 0};
    builder.collect(*core, 0);

    // Greek-alphabet allocation: deeper operators get earlier ids; ties are
    // broken left to right. This is a valid topological order because every
    // input of a node is strictly deeper than the node itself.
    std::vector<PendingNode> ordered = builder.pending;
    std::stable_sort(ordered.begin(), ordered.end(), [](const PendingNode& a, const PendingNode& b) {
        if (a.depth != b.depth) return a.depth > b.depth;
        return a.dfs_index < b.dfs_index;
    });

    StlGraph g;
    g.n_steps = n_steps;
    std::map<const Formula*, int> node_id;
    for (size_t i = 0; i < ordered.size(); ++i) node_id[ordered[i].formula] = static_cast<int>(i);

    auto make_parent = [&](const Formula& child) -> ParentRef {
        if (child.kind == Connective::Predicate || child.kind == Connective::Not) {
            const bool negated = child.kind == Connective::Not;
            const Formula& leaf = negated ? *child.left : child;
            ParentRef ref;
            ref.is_node = false;
            ref.negated = negated;
            ref.index = static_cast<int>(g.predicates.size());
            g.predicates.push_back(leaf.pred);
            return ref;
        }
        return ParentRef{true, node_id.at(&child), false};
    };

    g.nodes.resize(ordered.size());
    for (size_t i = 0; i < ordered.size(); ++i) {
        const Formula& f = *ordered[i].formula;
        StlNode& node = g.nodes[i];
        node.id = static_cast<int>(i);
        node.var_offset = node.id * n_steps;
        switch (f.kind) {
            case Connective::And: node.op = NodeOp::And; break;
            case Connective::Or: node.op = NodeOp::Or; break;
            case Connective::Always: node.op = NodeOp::Always; break;
            case Connective::Eventually: node.op = NodeOp::Eventually; break;
            default: throw std::logic_error("non-operator node in compile");
        }
        if (node.is_bridge()) {
            node.left = make_parent(*f.left);
            node.right = make_parent(*f.right);
        } else {
            node.left = make_parent(*f.left);
            node.k_a = f.window.resolve_lo(n_steps);
            node.k_b = f.window.resolve_hi(n_steps);
            if (node.k_a < 1 || node.k_b > n_steps || node.k_a > node.k_b) {
                throw std::invalid_argument("window empty after grid resolution");
            }
            node.interest = f.interest;
        }
    }
    g.root = g.n_nodes() - 1;

    // Direction rules: interest decides (After -> backward, Before -> forward)
    // except the root, which is computed forward in any case.
    for (StlNode& node : g.nodes) {
        if (node.is_bridge()) continue;
        if (node.id == g.root) {
            node.direction = Direction::Forward;
        } else {
            node.direction = node.interest == TemporalInterest::After ? Direction::Backward
                                                                      : Direction::Forward;
        }
    }
    return g;
}

std::vector<int> order_nodes(const StlGraph& g) {
    const int m = g.n_nodes();
    std::vector<int> order;
    order.reserve(m);
    std::vector<bool> placed(m, false);
    // Kahn-style sweep over the parent relation.
    for (int emitted = 0; emitted < m;) {
        bool progressed = false;
        for (int i = 0; i < m; ++i) {
            if (placed[i]) continue;
            const StlNode& node = g.nodes[i];
            auto ready = [&](const ParentRef& p) { return !p.is_node || placed[p.index]; };
            if (ready(node.left) && (!node.is_bridge() || ready(node.right))) {
                order.push_back(i);
                placed[i] = true;
                ++emitted;
                progressed = true;
            }
        }
        if (!progressed) throw std::logic_error("cycle detected in operator graph");
    }
    return order;
}

nlohmann::json graph_to_json(const StlGraph& g) {
    nlohmann::json j;
    j["n_steps"] = g.n_steps;
    j["root"] = g.root;
    auto parent_json = [](const ParentRef& p) {
        nlohmann::json pj;
        pj["type"] = p.is_node ? "node" : "predicate";
        pj["index"] = p.index;
        if (!p.is_node) pj["negated"] = p.negated;
        return pj;
    };
    nlohmann::json nodes = nlohmann::json::array();
    for (const StlNode& node : g.nodes) {
        nlohmann::json nj;
        nj["id"] = node.id;
        nj["op"] = node_op_name(node.op);
        nj["kind"] = node.is_bridge() ? "bridge" : "flow";
        nj["var_range"] = {node.var_offset, node.var_offset + g.n_steps};
        if (node.is_bridge()) {
            nj["parents"] = {parent_json(node.left), parent_json(node.right)};
        } else {
            nj["parents"] = {parent_json(node.left)};
            nj["window"] = {node.k_a, node.k_b};
            nj["interest"] = node.interest == TemporalInterest::After ? "after" : "before";
            nj["direction"] = node.direction == Direction::Backward ? "backward" : "forward";
        }
        nodes.push_back(nj);
    }
    j["nodes"] = nodes;
    nlohmann::json preds = nlohmann::json::array();
    for (const PredicateSpec& p : g.predicates) {
        nlohmann::json pj;
        pj["label"] = p.label();
        pj["signal"] = p.signal;
        pj["slice"] = {p.slice.offset, p.slice.offset + p.slice.size};
        pj["threshold"] = p.threshold;
        switch (p.kind) {
            case PredicateKind::Affine: pj["kind"] = "affine"; pj["component"] = p.component; break;
            case PredicateKind::NormGeq: pj["kind"] = "norm-geq"; break;
            case PredicateKind::NormLeq: pj["kind"] = "norm-leq"; break;
        }
        preds.push_back(pj);
    }
    j["predicates"] = preds;
    return j;
}

std::vector<std::pair<int, int>> structural_blocks(const StlGraph& g) {
    std::set<std::pair<int, int>> blocks;
    for (const StlNode& node : g.nodes) {
        blocks.insert({node.id, node.id});  // self block
        auto add = [&](const ParentRef& p) {
            blocks.insert({node.id, p.is_node ? p.index : -1});
        };
        add(node.left);
        if (node.is_bridge()) add(node.right);
    }
    return {blocks.begin(), blocks.end()};
}

std::string sparsity_grid(const StlGraph& g) {
    const auto blocks = structural_blocks(g);
    std::set<std::pair<int, int>> set(blocks.begin(), blocks.end());
    std::ostringstream os;
    os << "        x ";
    for (int j = 0; j < g.n_nodes(); ++j) os << 'a' << j << ' ';
    os << '\n';
    for (int i = 0; i < g.n_nodes(); ++i) {
        os << 'a' << i << (i < 10 ? "      " : "     ");
        os << (set.count({i, -1}) ? '#' : '.') << ' ';
        for (int j = 0; j < g.n_nodes(); ++j) {
            os << (set.count({i, j}) ? '#' : '.') << "  ";
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace stlcvx
