#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actgraph/rules.hpp"
#include "actgraph/vocab.hpp"

namespace actgraph {

enum class NodeKind { SpatialUnary, SpatialBinary, Action };
enum class EdgeKind { Then, And, Or };

inline const char* node_kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::SpatialUnary: return "SPATIAL_UNARY";
        case NodeKind::SpatialBinary: return "SPATIAL_BINARY";
        case NodeKind::Action: return "ACTION";
    }
    return "?";
}

inline const char* edge_kind_name(EdgeKind k) {
    switch (k) {
        case EdgeKind::Then: return "THEN";
        case EdgeKind::And: return "AND";
        case EdgeKind::Or: return "OR";
    }
    return "?";
}

struct ClauseNode {
    int node_id = 0;
    NodeKind kind = NodeKind::SpatialUnary;
    std::string op;
    std::vector<std::string> operands;  // variable names, 1 or 2, in clause order
    bool negated = false;
};

struct GraphEdge {
    int from = 0;
    int to = 0;
    EdgeKind kind = EdgeKind::Then;
};

struct ActivityGraph {
    std::string name;
    std::map<std::string, std::string> variables;  // variable → element
    std::vector<ClauseNode> nodes;
    std::vector<GraphEdge> edges;

    const ClauseNode& node(int id) const { return nodes[static_cast<size_t>(id)]; }

    std::vector<int> then_preds(int id) const {
        std::vector<int> out;
        for (const auto& e : edges)
            if (e.kind == EdgeKind::Then && e.to == id) out.push_back(e.from);
        return out;
    }
    std::vector<int> then_succs(int id) const {
        std::vector<int> out;
        for (const auto& e : edges)
            if (e.kind == EdgeKind::Then && e.from == id) out.push_back(e.to);
        return out;
    }
    std::vector<int> concurrency_partners(int id, EdgeKind kind) const {
        std::vector<int> out;
        for (const auto& e : edges) {
            if (e.kind != kind) continue;
            if (e.from == id) out.push_back(e.to);
            else if (e.to == id) out.push_back(e.from);
        }
        return out;
    }
};

// ── diagnostics ─────────────────────────────────────────────────────────────

struct Diagnostic {
    enum class Code {
        CycleDetected,
        UnreachableNode,
        UnboundedNot,
        NegatedConcurrency,
        OperandRepeat,
        AndOrThenConflict,
    };
    Code code;
    int node_id = -1;  // -1 when the diagnostic is not node specific
    std::string message;
};

inline const char* diagnostic_code_name(Diagnostic::Code c) {
    switch (c) {
        case Diagnostic::Code::CycleDetected: return "CycleDetected";
        case Diagnostic::Code::UnreachableNode: return "UnreachableNode";
        case Diagnostic::Code::UnboundedNot: return "UnboundedNot";
        case Diagnostic::Code::NegatedConcurrency: return "NegatedConcurrency";
        case Diagnostic::Code::OperandRepeat: return "OperandRepeat";
        case Diagnostic::Code::AndOrThenConflict: return "AndOrThenConflict";
    }
    return "?";
}

// ── compilation ─────────────────────────────────────────────────────────────

namespace detail {

struct Piece {
    std::vector<int> sources;
    std::vector<int> sinks;
};

class Compiler {
public:
    Compiler(ActivityGraph& g, const Vocabulary& vocab) : g_(g), vocab_(vocab) {}

    Piece walk(const AstNode& n) {
        switch (n.type) {
            case AstNode::Type::Clause:
                return emit_clause(n);
            case AstNode::Type::Then: {
                const Piece l = walk(*n.lhs);
                const Piece r = walk(*n.rhs);
                for (int s : l.sinks)
                    for (int t : r.sources) g_.edges.push_back({s, t, EdgeKind::Then});
                return {l.sources, r.sinks};
            }
            case AstNode::Type::And:
            case AstNode::Type::Or: {
                const Piece l = walk(*n.lhs);
                const Piece r = walk(*n.rhs);
                const EdgeKind k = n.type == AstNode::Type::And ? EdgeKind::And : EdgeKind::Or;
                for (int a : l.sinks)
                    for (int b : r.sinks)
                        g_.edges.push_back({std::min(a, b), std::max(a, b), k});
                Piece out;
                out.sources = l.sources;
                out.sources.insert(out.sources.end(), r.sources.begin(), r.sources.end());
                out.sinks = l.sinks;
                out.sinks.insert(out.sinks.end(), r.sinks.begin(), r.sinks.end());
                return out;
            }
        }
        throw CompileError("unhandled AST node");
    }

private:
    ActivityGraph& g_;
    const Vocabulary& vocab_;

    Piece emit_clause(const AstNode& n) {
        ClauseNode node;
        node.node_id = static_cast<int>(g_.nodes.size());
        node.negated = n.negated;
        if (n.idents.size() == 3) {
            node.op = n.idents[1];
            node.operands = {n.idents[0], n.idents[2]};
            if (!vocab_.is_spatial_binary(node.op)) {
                if (vocab_.is_operator(node.op))
                    throw CompileError("rule " + g_.name + ": operator '" + node.op +
                                       "' does not take two operands");
                throw CompileError("rule " + g_.name + ": unknown operator '" + node.op + "'");
            }
            node.kind = NodeKind::SpatialBinary;
        } else {
            node.op = n.idents[1];
            node.operands = {n.idents[0]};
            if (vocab_.is_spatial_unary(node.op)) {
                node.kind = NodeKind::SpatialUnary;
            } else if (vocab_.is_action(node.op)) {
                node.kind = NodeKind::Action;
                const auto it = g_.variables.find(node.operands[0]);
                if (it != g_.variables.end() && it->second != "person")
                    throw CompileError("rule " + g_.name + ": action '" + node.op +
                                       "' applied to non-person variable '" + node.operands[0] + "'");
            } else if (vocab_.is_spatial_binary(node.op)) {
                throw CompileError("rule " + g_.name + ": operator '" + node.op +
                                   "' requires two operands");
            } else {
                throw CompileError("rule " + g_.name + ": unknown operator '" + node.op + "'");
            }
        }
        g_.nodes.push_back(node);
        return {{node.node_id}, {node.node_id}};
    }
};

// Replaces rule-reference clauses (unary clauses whose operator names an
// earlier rule) with the referenced rule's body, substituting the reference
// operand for the referenced rule's first declared variable. Only one level
// of reference is permitted.
inline std::unique_ptr<AstNode> clone_with_substitution(
    const AstNode& n, const std::map<std::string, std::string>& subst) {
    if (n.type == AstNode::Type::Clause) {
        std::vector<std::string> ids = n.idents;
        // Operand positions: 0 (and 2 for binary clauses).
        for (size_t i : n.idents.size() == 3 ? std::vector<size_t>{0, 2} : std::vector<size_t>{0}) {
            const auto it = subst.find(ids[i]);
            if (it != subst.end()) ids[i] = it->second;
        }
        return AstNode::clause(std::move(ids), n.negated);
    }
    return AstNode::binary(n.type, clone_with_substitution(*n.lhs, subst),
                           clone_with_substitution(*n.rhs, subst));
}

inline bool clause_is_rule_ref(const AstNode& n, const Vocabulary& vocab,
                               const std::map<std::string, const RuleAst*>& registry) {
    return n.type == AstNode::Type::Clause && n.idents.size() == 2 &&
           !vocab.is_operator(n.idents[1]) && registry.count(n.idents[1]) != 0;
}

inline std::unique_ptr<AstNode> inline_rule_refs(const AstNode& n, RuleAst& host,
                                                 const Vocabulary& vocab,
                                                 const std::map<std::string, const RuleAst*>& registry,
                                                 int depth) {
    if (n.type == AstNode::Type::Clause) {
        if (!clause_is_rule_ref(n, vocab, registry))
            return AstNode::clause(n.idents, n.negated);
        if (depth >= 1)
            throw CompileError("rule " + host.name + ": reference to '" + n.idents[1] +
                               "' nests deeper than one level");
        if (n.negated)
            throw CompileError("rule " + host.name + ": 'not' cannot be applied to the rule reference '" +
                               n.idents[1] + "'");
        const RuleAst& sub = *registry.at(n.idents[1]);
        if (sub.var_decls.empty())
            throw CompileError("rule " + host.name + ": referenced rule '" + sub.name +
                               "' declares no variables");
        std::map<std::string, std::string> subst;
        subst[sub.var_decls[0].first] = n.idents[0];
        for (size_t i = 1; i < sub.var_decls.size(); ++i) {
            const std::string fresh = sub.name + "_" + sub.var_decls[i].first;
            subst[sub.var_decls[i].first] = fresh;
            if (!host.declares(fresh))
                host.var_decls.emplace_back(fresh, sub.var_decls[i].second);
        }
        auto spliced = clone_with_substitution(*sub.body, subst);
        return inline_rule_refs(*spliced, host, vocab, registry, depth + 1);
    }
    return AstNode::binary(n.type, inline_rule_refs(*n.lhs, host, vocab, registry, depth),
                           inline_rule_refs(*n.rhs, host, vocab, registry, depth));
}

}  // namespace detail

inline ActivityGraph compile(const RuleAst& ast, const Vocabulary& vocab) {
    ActivityGraph g;
    g.name = ast.name;
    for (const auto& [var, elem] : ast.var_decls) {
        if (!vocab.is_element(elem))
            throw CompileError("rule " + ast.name + ": unknown element '" + elem +
                               "' for variable '" + var + "'");
        g.variables[var] = elem;
    }
    detail::Compiler c(g, vocab);
    c.walk(*ast.body);
    return g;
}

// Compiles every rule in a file, resolving one level of rule references by
// inlining the referenced body.
inline std::vector<ActivityGraph> compile_rules(const std::vector<RuleAst>& rules,
                                                const Vocabulary& vocab) {
    std::map<std::string, const RuleAst*> registry;
    std::vector<ActivityGraph> out;
    for (const auto& rule : rules) {
        RuleAst expanded;
        expanded.name = rule.name;
        expanded.var_decls = rule.var_decls;
        expanded.body = detail::inline_rule_refs(*rule.body, expanded, vocab, registry, 0);
        out.push_back(compile(expanded, vocab));
        registry[rule.name] = &rule;
    }
    return out;
}

// ── validation ──────────────────────────────────────────────────────────────

namespace detail {

// Transitive closure over THEN edges.
inline std::vector<std::vector<bool>> then_reach(const ActivityGraph& g) {
    const size_t n = g.nodes.size();
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (const auto& e : g.edges)
        if (e.kind == EdgeKind::Then) reach[static_cast<size_t>(e.from)][static_cast<size_t>(e.to)] = true;
    for (size_t k = 0; k < n; ++k)
        for (size_t i = 0; i < n; ++i)
            if (reach[i][k])
                for (size_t j = 0; j < n; ++j)
                    if (reach[k][j]) reach[i][j] = true;
    return reach;
}

}  // namespace detail

inline std::vector<Diagnostic> validate(const ActivityGraph& g) {
    std::vector<Diagnostic> out;
    const size_t n = g.nodes.size();
    if (n == 0) return out;
    const auto reach = detail::then_reach(g);

    bool cyclic = false;
    for (size_t i = 0; i < n; ++i)
        if (reach[i][i]) cyclic = true;
    if (cyclic)
        out.push_back({Diagnostic::Code::CycleDetected, -1, "THEN edges form a cycle"});

    // Reachability from THEN sources.
    if (!cyclic) {
        std::vector<bool> has_pred(n, false);
        for (const auto& e : g.edges)
            if (e.kind == EdgeKind::Then) has_pred[static_cast<size_t>(e.to)] = true;
        std::vector<bool> reachable(n, false);
        for (size_t i = 0; i < n; ++i) {
            if (has_pred[i]) continue;
            reachable[i] = true;
            for (size_t j = 0; j < n; ++j)
                if (reach[i][j]) reachable[j] = true;
        }
        for (size_t i = 0; i < n; ++i)
            if (!reachable[i])
                out.push_back({Diagnostic::Code::UnreachableNode, static_cast<int>(i),
                               "node " + std::to_string(i) + " is unreachable from every source"});
    }

    for (const auto& e : g.edges) {
        if (e.kind == EdgeKind::Then) continue;
        const size_t a = static_cast<size_t>(e.from), b = static_cast<size_t>(e.to);
        if (reach[a][b] || reach[b][a])
            out.push_back({Diagnostic::Code::AndOrThenConflict, e.from,
                           std::string(edge_kind_name(e.kind)) + " edge " + std::to_string(e.from) +
                               "--" + std::to_string(e.to) + " connects THEN-ordered nodes"});
        if (g.node(e.from).negated || g.node(e.to).negated)
            out.push_back({Diagnostic::Code::NegatedConcurrency, e.from,
                           std::string(edge_kind_name(e.kind)) + " edge touches a negated node"});
    }

    for (const auto& node : g.nodes) {
        if (node.operands.size() == 2 && node.operands[0] == node.operands[1])
            out.push_back({Diagnostic::Code::OperandRepeat, node.node_id,
                           "node " + std::to_string(node.node_id) +
                               " uses the same variable for both operands"});
        if (!node.negated) continue;
        // A negated clause is only decidable over a window bounded by matchable
        // THEN-neighbors on both sides.
        const size_t id = static_cast<size_t>(node.node_id);
        bool bounded_before = false, bounded_after = false;
        for (size_t j = 0; j < n; ++j) {
            if (g.nodes[j].negated) continue;
            if (reach[j][id]) bounded_before = true;
            if (reach[id][j]) bounded_after = true;
        }
        if (!bounded_before || !bounded_after)
            out.push_back({Diagnostic::Code::UnboundedNot, node.node_id,
                           "negated node " + std::to_string(node.node_id) +
                               " lacks a matchable THEN-neighbor on " +
                               (bounded_before ? "the right" : bounded_after ? "the left" : "both sides")});
    }
    return out;
}

// True when the graph contains no positively matched spatial clause, i.e. the
// kind of rule for which deferred action matching cannot help and every person
// chunk has to be scanned.
inline bool graph_is_nn_only(const ActivityGraph& g) {
    for (const auto& node : g.nodes)
        if (node.kind != NodeKind::Action && !node.negated) return false;
    return true;
}

// True when some action node has no positively matched spatial clause anywhere
// among its THEN ancestors, leaving its scan window unbounded below. Such
// graphs are matched against eagerly computed action reports.
inline bool graph_needs_eager_actions(const ActivityGraph& g) {
    if (g.nodes.empty()) return false;
    const auto reach = detail::then_reach(g);
    for (const auto& node : g.nodes) {
        if (node.kind != NodeKind::Action || node.negated) continue;
        bool anchored = false;
        for (const auto& anc : g.nodes) {
            if (anc.kind == NodeKind::Action || anc.negated) continue;
            if (reach[static_cast<size_t>(anc.node_id)][static_cast<size_t>(node.node_id)])
                anchored = true;
        }
        if (!anchored) return true;
    }
    return false;
}

// ── stable text dump (used by the CLI `parse` subcommand and golden tests) ──

inline std::string dump(const ActivityGraph& g) {
    std::ostringstream os;
    os << "graph " << g.name << "\n";
    for (const auto& [var, elem] : g.variables) os << "var " << var << " : " << elem << "\n";
    for (const auto& node : g.nodes) {
        os << "node " << node.node_id << " " << node_kind_name(node.kind) << " " << node.op;
        for (const auto& v : node.operands) os << " " << v;
        if (node.negated) os << " not";
        os << "\n";
    }
    std::vector<GraphEdge> sorted = g.edges;
    std::sort(sorted.begin(), sorted.end(), [](const GraphEdge& a, const GraphEdge& b) {
        if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        if (a.from != b.from) return a.from < b.from;
        return a.to < b.to;
    });
    for (const auto& e : sorted) {
        const char* arrow = e.kind == EdgeKind::Then ? "->" : "--";
        os << "edge " << e.from << " " << arrow << " " << e.to << " " << edge_kind_name(e.kind) << "\n";
    }
    return os.str();
}

}  // namespace actgraph
