#pragma once

// Random well-formed rule generator for the parser round-trip and compiler
// totality properties.

#include <random>
#include <string>
#include <vector>

#include "actgraph/rules.hpp"
#include "actgraph/vocab.hpp"

namespace testsupport {

struct RuleGenOptions {
    int max_clauses = 12;
    bool allow_not = false;  // negation only in THEN-interior positions is valid;
                             // round-trip generation keeps it off by default
};

class RuleGen {
public:
    RuleGen(std::uint64_t seed, const actgraph::Vocabulary& vocab, RuleGenOptions opt = {})
        : rng_(seed), vocab_(vocab), opt_(opt) {
        for (const auto& a : vocab_.actions) actions_.push_back(a);
        for (const auto& u : vocab_.spatial_unary) unary_.push_back(u);
        for (const auto& b : vocab_.spatial_binary) binary_.push_back(b);
        for (const auto& e : vocab_.elements) elements_.push_back(e);
    }

    actgraph::RuleAst next_rule(int index) {
        actgraph::RuleAst rule;
        rule.name = "rule_" + std::to_string(index);
        const int nvars = pick_int(1, 4);
        for (int v = 0; v < nvars; ++v) {
            const std::string elem = v == 0 ? "person" : elements_[pick_size(elements_.size())];
            rule.var_decls.emplace_back("v" + std::to_string(v), elem);
        }
        budget_ = pick_int(1, opt_.max_clauses);
        rule.body = gen_expr(rule, 0);
        return rule;
    }

private:
    std::mt19937_64 rng_;
    const actgraph::Vocabulary& vocab_;
    RuleGenOptions opt_;
    std::vector<std::string> actions_, unary_, binary_, elements_;
    int budget_ = 1;

    int pick_int(int lo, int hi) { return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1)); }
    size_t pick_size(size_t n) { return static_cast<size_t>(rng_() % n); }

    std::string person_var(const actgraph::RuleAst& rule) {
        std::vector<std::string> people;
        for (const auto& [v, e] : rule.var_decls)
            if (e == "person") people.push_back(v);
        return people[pick_size(people.size())];
    }

    std::string any_var(const actgraph::RuleAst& rule) {
        return rule.var_decls[pick_size(rule.var_decls.size())].first;
    }

    std::unique_ptr<actgraph::AstNode> gen_clause(const actgraph::RuleAst& rule) {
        --budget_;
        switch (pick_int(0, 2)) {
            case 0:
                return actgraph::AstNode::clause({person_var(rule), actions_[pick_size(actions_.size())]},
                                                 false);
            case 1:
                return actgraph::AstNode::clause({any_var(rule), unary_[pick_size(unary_.size())]},
                                                 false);
            default: {
                std::string a = any_var(rule), b = any_var(rule);
                if (a == b && rule.var_decls.size() > 1) {
                    for (const auto& [v, e] : rule.var_decls)
                        if (v != a) { b = v; break; }
                }
                return actgraph::AstNode::clause({a, binary_[pick_size(binary_.size())], b}, false);
            }
        }
    }

    std::unique_ptr<actgraph::AstNode> gen_expr(const actgraph::RuleAst& rule, int depth) {
        auto node = gen_term(rule, depth);
        while (budget_ > 0 && pick_int(0, 2) == 0)
            node = actgraph::AstNode::binary(actgraph::AstNode::Type::Then, std::move(node),
                                             gen_term(rule, depth));
        return node;
    }

    std::unique_ptr<actgraph::AstNode> gen_term(const actgraph::RuleAst& rule, int depth) {
        auto node = gen_factor(rule, depth);
        while (budget_ > 0 && pick_int(0, 3) == 0) {
            const auto t = pick_int(0, 1) == 0 ? actgraph::AstNode::Type::And
                                               : actgraph::AstNode::Type::Or;
            node = actgraph::AstNode::binary(t, std::move(node), gen_factor(rule, depth));
        }
        return node;
    }

    std::unique_ptr<actgraph::AstNode> gen_factor(const actgraph::RuleAst& rule, int depth) {
        if (depth < 2 && budget_ > 1 && pick_int(0, 3) == 0) return gen_expr(rule, depth + 1);
        return gen_clause(rule);
    }
};

}  // namespace testsupport
