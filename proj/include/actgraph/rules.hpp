#pragma once

#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actgraph/core.hpp"

namespace actgraph {

struct UndeclaredVariable : ParseError { using ParseError::ParseError; };

// ── tokens ──────────────────────────────────────────────────────────────────

enum class TokKind { Ident, LParen, RParen, Colon, Semicolon, Comma, Keyword };

inline const char* tok_kind_name(TokKind k) {
    switch (k) {
        case TokKind::Ident: return "IDENT";
        case TokKind::LParen: return "LPAREN";
        case TokKind::RParen: return "RPAREN";
        case TokKind::Colon: return "COLON";
        case TokKind::Semicolon: return "SEMICOLON";
        case TokKind::Comma: return "COMMA";
        case TokKind::Keyword: return "KEYWORD";
    }
    return "?";
}

struct Token {
    TokKind kind;
    std::string text;
    int line = 1;
    int col = 1;
};

// The temporal operators are the language's only keywords.
inline bool is_temporal_keyword(const std::string& s) {
    return s == "then" || s == "and" || s == "or" || s == "not";
}

// Splits rule text into tokens. `#` starts a line comment. Identifiers are
// [a-z0-9_-]+; anything else outside the punctuation set is a LexError.
inline std::vector<Token> tokenize(const std::string& source) {
    std::vector<Token> out;
    int line = 1, col = 1;
    size_t i = 0;
    const auto step = [&](char c) {
        if (c == '\n') { ++line; col = 1; } else { ++col; }
    };
    while (i < source.size()) {
        const char c = source[i];
        if (c == '#') {
            while (i < source.size() && source[i] != '\n') { step(source[i]); ++i; }
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            step(c); ++i;
            continue;
        }
        const int tl = line, tc = col;
        switch (c) {
            case '(': out.push_back({TokKind::LParen, "(", tl, tc}); step(c); ++i; continue;
            case ')': out.push_back({TokKind::RParen, ")", tl, tc}); step(c); ++i; continue;
            case ':': out.push_back({TokKind::Colon, ":", tl, tc}); step(c); ++i; continue;
            case ';': out.push_back({TokKind::Semicolon, ";", tl, tc}); step(c); ++i; continue;
            case ',': out.push_back({TokKind::Comma, ",", tl, tc}); step(c); ++i; continue;
            default: break;
        }
        const auto ident_char = [](char ch) {
            return (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '_' || ch == '-';
        };
        if (!ident_char(c))
            throw LexError("line " + std::to_string(tl) + ":" + std::to_string(tc) +
                           ": character '" + std::string(1, c) + "' outside the grammar alphabet");
        std::string word;
        while (i < source.size() && ident_char(source[i])) {
            word.push_back(source[i]);
            step(source[i]); ++i;
        }
        out.push_back({is_temporal_keyword(word) ? TokKind::Keyword : TokKind::Ident, word, tl, tc});
    }
    return out;
}

// ── AST ─────────────────────────────────────────────────────────────────────

struct AstNode {
    enum class Type { Clause, Then, And, Or };

    Type type = Type::Clause;

    // Clause payload: 2 idents (operand, operator) or 3 (operand, operator, operand).
    std::vector<std::string> idents;
    bool negated = false;

    std::unique_ptr<AstNode> lhs;
    std::unique_ptr<AstNode> rhs;

    static std::unique_ptr<AstNode> clause(std::vector<std::string> ids, bool neg) {
        auto n = std::make_unique<AstNode>();
        n->type = Type::Clause;
        n->idents = std::move(ids);
        n->negated = neg;
        return n;
    }
    static std::unique_ptr<AstNode> binary(Type t, std::unique_ptr<AstNode> l,
                                           std::unique_ptr<AstNode> r) {
        auto n = std::make_unique<AstNode>();
        n->type = t;
        n->lhs = std::move(l);
        n->rhs = std::move(r);
        return n;
    }
};

inline bool ast_equal(const AstNode& a, const AstNode& b) {
    if (a.type != b.type) return false;
    if (a.type == AstNode::Type::Clause)
        return a.idents == b.idents && a.negated == b.negated;
    return ast_equal(*a.lhs, *b.lhs) && ast_equal(*a.rhs, *b.rhs);
}

struct RuleAst {
    std::string name;
    std::vector<std::pair<std::string, std::string>> var_decls;  // (variable, element), declaration order
    std::unique_ptr<AstNode> body;

    bool declares(const std::string& var) const {
        for (const auto& [v, e] : var_decls)
            if (v == var) return true;
        return false;
    }
    std::string element_of(const std::string& var) const {
        for (const auto& [v, e] : var_decls)
            if (v == var) return e;
        return {};
    }
};

inline bool rule_ast_equal(const RuleAst& a, const RuleAst& b) {
    return a.name == b.name && a.var_decls == b.var_decls && ast_equal(*a.body, *b.body);
}

// ── parser ──────────────────────────────────────────────────────────────────
//
// rule   := IDENT ":" var_decl ("," var_decl)* ";" expr
// expr   := term ("then" term)*
// term   := factor (("and"|"or") factor)*
// factor := ["not"] clause | "(" expr ")"
// clause := "(" IDENT IDENT IDENT ")" | "(" IDENT IDENT ")" | IDENT IDENT
//
// Precedence: not > and = or > then, all left-associative.

namespace detail {

class RuleParser {
public:
    RuleParser(const std::vector<Token>& toks, const RuleAst* context)
        : toks_(toks), rule_(context) {}

    size_t pos = 0;

    bool at_end() const { return pos >= toks_.size(); }

    std::vector<RuleAst> parse_file() {
        std::vector<RuleAst> rules;
        while (!at_end()) rules.push_back(parse_rule());
        return rules;
    }

    RuleAst parse_rule() {
        RuleAst rule;
        rule.name = expect(TokKind::Ident, "rule name").text;
        expect(TokKind::Colon, "':' after rule name");
        for (;;) {
            const std::string var = expect(TokKind::Ident, "variable name").text;
            expect(TokKind::Colon, "':' in variable declaration");
            const std::string elem = expect(TokKind::Ident, "element name").text;
            if (rule.declares(var)) fail("duplicate variable '" + var + "'");
            rule.var_decls.emplace_back(var, elem);
            if (!match(TokKind::Comma)) break;
        }
        expect(TokKind::Semicolon, "';' before rule body");
        rule_ = &rule;
        rule.body = parse_expr();
        rule_ = nullptr;
        return rule;
    }

    std::unique_ptr<AstNode> parse_expr() {
        auto node = parse_term();
        while (match_keyword("then"))
            node = AstNode::binary(AstNode::Type::Then, std::move(node), parse_term());
        return node;
    }

private:
    const std::vector<Token>& toks_;
    const RuleAst* rule_ = nullptr;

    const Token* peek(size_t ahead = 0) const {
        return pos + ahead < toks_.size() ? &toks_[pos + ahead] : nullptr;
    }

    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream os;
        if (const Token* t = peek())
            os << "line " << t->line << ":" << t->col << ": " << what << " (got '" << t->text << "')";
        else
            os << "unexpected end of input: " << what;
        throw ParseError(os.str());
    }

    Token expect(TokKind k, const std::string& what) {
        const Token* t = peek();
        if (!t || t->kind != k) fail("expected " + std::string(tok_kind_name(k)) + " — " + what);
        ++pos;
        return *t;
    }

    bool match(TokKind k) {
        const Token* t = peek();
        if (t && t->kind == k) { ++pos; return true; }
        return false;
    }

    bool match_keyword(const char* kw) {
        const Token* t = peek();
        if (t && t->kind == TokKind::Keyword && t->text == kw) { ++pos; return true; }
        return false;
    }

    std::unique_ptr<AstNode> parse_term() {
        auto node = parse_factor();
        for (;;) {
            if (match_keyword("and"))
                node = AstNode::binary(AstNode::Type::And, std::move(node), parse_factor());
            else if (match_keyword("or"))
                node = AstNode::binary(AstNode::Type::Or, std::move(node), parse_factor());
            else
                return node;
        }
    }

    bool looks_like_paren_clause() const {
        // "(" IDENT IDENT ")"  or  "(" IDENT IDENT IDENT ")"
        const Token* a = peek(1);
        const Token* b = peek(2);
        if (!a || !b || a->kind != TokKind::Ident || b->kind != TokKind::Ident) return false;
        const Token* c = peek(3);
        if (c && c->kind == TokKind::RParen) return true;
        const Token* d = peek(4);
        return c && d && c->kind == TokKind::Ident && d->kind == TokKind::RParen;
    }

    std::unique_ptr<AstNode> parse_factor() {
        if (match_keyword("not")) {
            auto cl = parse_clause();
            cl->negated = true;
            return cl;
        }
        const Token* t = peek();
        if (t && t->kind == TokKind::LParen && !looks_like_paren_clause()) {
            ++pos;
            auto inner = parse_expr();
            expect(TokKind::RParen, "')' closing group");
            return inner;
        }
        return parse_clause();
    }

    std::string clause_operand() {
        const Token tok = expect(TokKind::Ident, "clause operand");
        if (rule_ && !rule_->declares(tok.text))
            throw UndeclaredVariable("line " + std::to_string(tok.line) + ":" +
                                     std::to_string(tok.col) + ": variable '" + tok.text +
                                     "' is not declared");
        return tok.text;
    }

    std::unique_ptr<AstNode> parse_clause() {
        std::vector<std::string> ids;
        if (match(TokKind::LParen)) {
            ids.push_back(clause_operand());
            ids.push_back(expect(TokKind::Ident, "clause operator").text);
            const Token* t = peek();
            if (t && t->kind == TokKind::Ident) {
                ids.push_back(clause_operand());
            }
            expect(TokKind::RParen, "')' closing clause");
        } else {
            ids.push_back(clause_operand());
            ids.push_back(expect(TokKind::Ident, "clause operator").text);
        }
        return AstNode::clause(std::move(ids), false);
    }
};

}  // namespace detail

inline RuleAst parse(const std::vector<Token>& tokens) {
    detail::RuleParser p(tokens, nullptr);
    RuleAst r = p.parse_rule();
    if (!p.at_end())
        throw ParseError("trailing tokens after rule (token " + std::to_string(p.pos) + ")");
    return r;
}

// Parses a whole rule file (one or more rules).
inline std::vector<RuleAst> parse_rules(const std::string& source) {
    const auto tokens = tokenize(source);
    detail::RuleParser p(tokens, nullptr);
    return p.parse_file();
}

// ── canonical rendering ─────────────────────────────────────────────────────

namespace detail {

inline void render_node(const AstNode& n, std::ostream& os, const AstNode* parent, bool right_child) {
    switch (n.type) {
        case AstNode::Type::Clause: {
            if (n.negated) os << "not ";
            if (n.idents.size() == 3)
                os << "(" << n.idents[0] << " " << n.idents[1] << " " << n.idents[2] << ")";
            else
                os << n.idents[0] << " " << n.idents[1];
            return;
        }
        case AstNode::Type::Then:
        case AstNode::Type::And:
        case AstNode::Type::Or: {
            const bool is_then = n.type == AstNode::Type::Then;
            bool parens = false;
            if (parent) {
                const bool parent_then = parent->type == AstNode::Type::Then;
                if (is_then && !parent_then) parens = true;          // then below and/or
                else if (is_then && parent_then && right_child) parens = true;   // right-nested then
                else if (!is_then && !parent_then && right_child) parens = true; // right-nested and/or
            }
            if (parens) os << "(";
            render_node(*n.lhs, os, &n, false);
            os << (is_then ? " then " : (n.type == AstNode::Type::And ? " and " : " or "));
            render_node(*n.rhs, os, &n, true);
            if (parens) os << ")";
            return;
        }
    }
}

}  // namespace detail

// Canonical text form; parse(render(ast)) reproduces the AST.
inline std::string render(const RuleAst& rule) {
    std::ostringstream os;
    os << rule.name << " : ";
    for (size_t i = 0; i < rule.var_decls.size(); ++i) {
        if (i) os << " , ";
        os << rule.var_decls[i].first << " : " << rule.var_decls[i].second;
    }
    os << " ; ";
    detail::render_node(*rule.body, os, nullptr, false);
    return os.str();
}

}  // namespace actgraph
