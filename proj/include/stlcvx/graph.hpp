#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "stlcvx/formula.hpp"

namespace stlcvx {

// Compiled operator graph for a core-form formula: one node per operator
// occurrence, resolved windows, STL-variable ranges, and propagation
// directions. Bridge nodes (and/or) have two upstream inputs; Flow nodes
// (always/eventually) have one. Nodes are stored topologically, inputs
// before consumers, root last; STL variables are allocated in that order so
// the assembled block system comes out lower block-triangular.

enum class NodeOp { And, Or, Always, Eventually };
enum class Direction { Forward, Backward };

const char* node_op_name(NodeOp op);

// Upstream input: either another node or a (possibly negated) predicate.
struct ParentRef {
    bool is_node = false;
    int index = -1;
    bool negated = false;  // predicates only
};

struct StlNode {
    int id = -1;
    NodeOp op = NodeOp::And;
    bool is_bridge() const { return op == NodeOp::And || op == NodeOp::Or; }
    bool takes_min() const { return op == NodeOp::And || op == NodeOp::Always; }

    // Flow only:
    int k_a = 1, k_b = 1;  // resolved window, 1-based
    TemporalInterest interest = TemporalInterest::Before;
    Direction direction = Direction::Forward;

    ParentRef left;   // Flow input lives here
    ParentRef right;  // Bridge only

    int var_offset = 0;  // start of this node's N variables in the STL-variable vector
};

struct StlGraph {
    std::vector<StlNode> nodes;
    std::vector<PredicateSpec> predicates;
    int root = -1;
    int n_steps = 0;

    int n_nodes() const { return static_cast<int>(nodes.size()); }
};

// Compile a validated core formula onto an N-point grid.
// Variable ranges follow tree order (deeper operators first); directions are
// assigned by temporal interest (After -> backward) with the root forced
// forward. Throws on non-core input, non-Flow root, unresolvable windows, or
// nesting deeper than max_depth.
StlGraph compile(const FormulaPtr& core, int n_steps, int max_depth = 32);

// Topological order of node ids (inputs before consumers). compile already
// stores nodes this way; this re-derives the order from the parent relation
// and throws if the wiring were ever cyclic.
std::vector<int> order_nodes(const StlGraph& g);

nlohmann::json graph_to_json(const StlGraph& g);

// Text grid of the block-sparsity pattern: one row per node over column
// blocks [x | node 0 | node 1 | ...].
std::string sparsity_grid(const StlGraph& g);

// Structural block pattern implied by the wiring: pairs (node id, column
// block) with column block -1 for the x block, otherwise a node id.
std::vector<std::pair<int, int>> structural_blocks(const StlGraph& g);

}  // namespace stlcvx
