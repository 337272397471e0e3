#include "tipflow/parser.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "tipflow/errors.hpp"

namespace tipflow::datalog {

const char* builtin_op_name(BuiltinOp op) {
    switch (op) {
        case BuiltinOp::Lt: return "<";
        case BuiltinOp::Le: return "<=";
        case BuiltinOp::Gt: return ">";
        case BuiltinOp::Ge: return ">=";
        case BuiltinOp::Eq: return "=";
        case BuiltinOp::Ne: return "!=";
        case BuiltinOp::EqualsStr: return "equals";
        case BuiltinOp::Contains: return "contains";
        case BuiltinOp::StartsWith: return "starts_with";
        case BuiltinOp::Assign: return "assign";
    }
    return "?";
}

namespace {

enum class Tok {
    Ident, Str, Int, Float,
    LParen, RParen, Comma, Dot, Implies,
    Lt, Le, Gt, Ge, Eq, Ne,
    Minus, Plus, Star, Slash,
    End
};

struct Token {
    Tok kind;
    std::string text;
    int64_t ival = 0;
    double fval = 0.0;
    size_t line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_ws();
        Token t;
        t.line = line_;
        t.col = col_;
        if (pos_ >= src_.size()) {
            t.kind = Tok::End;
            return t;
        }
        char c = src_[pos_];
        if (c == '(') return single(t, Tok::LParen);
        if (c == ')') return single(t, Tok::RParen);
        if (c == ',') return single(t, Tok::Comma);
        if (c == '.') return single(t, Tok::Dot);
        if (c == '+') return single(t, Tok::Plus);
        if (c == '*') return single(t, Tok::Star);
        if (c == '/') return single(t, Tok::Slash);
        if (c == ':') {
            if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '-') {
                advance(); advance();
                t.kind = Tok::Implies;
                return t;
            }
            throw SyntaxError("stray ':'", line_, col_);
        }
        if (c == '<') {
            advance();
            if (peek() == '=') { advance(); t.kind = Tok::Le; } else t.kind = Tok::Lt;
            return t;
        }
        if (c == '>') {
            advance();
            if (peek() == '=') { advance(); t.kind = Tok::Ge; } else t.kind = Tok::Gt;
            return t;
        }
        if (c == '=') { advance(); t.kind = Tok::Eq; return t; }
        if (c == '!') {
            advance();
            if (peek() == '=') { advance(); t.kind = Tok::Ne; return t; }
            throw SyntaxError("stray '!'", line_, col_);
        }
        if (c == '"') return lex_string(t);
        if (std::isdigit(static_cast<unsigned char>(c))) return lex_number(t, false);
        if (c == '-') {
            // '-' glues into an identifier when a letter follows (cbr-order),
            // starts a negative number before a digit, and stands alone as
            // the anonymous wildcard / arithmetic operator otherwise.
            if (pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
                advance();
                return lex_number(t, true);
            }
            return single(t, Tok::Minus);
        }
        if (is_ident_start(c)) return lex_ident(t);
        throw SyntaxError(std::string("unexpected character '") + c + "'", line_, col_);
    }

private:
    static bool is_ident_start(char c) {
        return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
    }
    static bool is_ident_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    }

    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
    char peek2() const { return pos_ + 1 < src_.size() ? src_[pos_ + 1] : '\0'; }

    void advance() {
        if (src_[pos_] == '\n') { ++line_; col_ = 1; } else ++col_;
        ++pos_;
    }

    void skip_ws() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '%') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    Token single(Token& t, Tok k) {
        advance();
        t.kind = k;
        return t;
    }

    Token lex_string(Token& t) {
        advance(); // opening quote
        std::string out;
        while (true) {
            if (pos_ >= src_.size()) throw SyntaxError("unterminated string", t.line, t.col);
            char c = src_[pos_];
            if (c == '"') { advance(); break; }
            if (c == '\\') {
                advance();
                if (pos_ >= src_.size()) throw SyntaxError("unterminated escape", line_, col_);
                char e = src_[pos_];
                switch (e) {
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    default: out.push_back(e); break;
                }
                advance();
            } else {
                out.push_back(c);
                advance();
            }
        }
        t.kind = Tok::Str;
        t.text = std::move(out);
        return t;
    }

    Token lex_number(Token& t, bool negative) {
        std::string digits;
        if (negative) digits.push_back('-');
        bool is_float = false;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c))) {
                digits.push_back(c);
                advance();
            } else if (c == '.' && std::isdigit(static_cast<unsigned char>(peek2()))) {
                is_float = true;
                digits.push_back(c);
                advance();
            } else if ((c == 'e' || c == 'E') && !digits.empty() &&
                       std::isdigit(static_cast<unsigned char>(digits.back()))) {
                size_t save = pos_;
                std::string exp(1, c);
                advance();
                if (peek() == '+' || peek() == '-') { exp.push_back(peek()); advance(); }
                if (!std::isdigit(static_cast<unsigned char>(peek()))) {
                    pos_ = save; // not an exponent after all
                    break;
                }
                while (std::isdigit(static_cast<unsigned char>(peek()))) { exp.push_back(peek()); advance(); }
                digits += exp;
                is_float = true;
                break;
            } else {
                break;
            }
        }
        if (is_float) {
            t.kind = Tok::Float;
            t.fval = std::stod(digits);
        } else {
            t.kind = Tok::Int;
            t.ival = std::stoll(digits);
        }
        return t;
    }

    Token lex_ident(Token& t) {
        std::string out;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (is_ident_char(c)) {
                out.push_back(c);
                advance();
            } else if (c == '-' && pos_ + 1 < src_.size() &&
                       (std::isalpha(static_cast<unsigned char>(src_[pos_ + 1])) || src_[pos_ + 1] == '_')) {
                out.push_back(c);
                advance();
            } else {
                break;
            }
        }
        t.kind = Tok::Ident;
        t.text = std::move(out);
        return t;
    }

    std::string_view src_;
    size_t pos_ = 0;
    size_t line_ = 1, col_ = 1;
};

bool is_named_builtin(const std::string& s) {
    return s == "equals" || s == "contains" || s == "starts_with" || s == "assign";
}

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) { shift(); }

    std::vector<Rule> parse() {
        std::vector<Rule> rules;
        while (cur_.kind != Tok::End) {
            rules.push_back(parse_rule());
        }
        return rules;
    }

private:
    void shift() { cur_ = lex_.next(); }

    [[noreturn]] void fail(const std::string& msg) { throw SyntaxError(msg, cur_.line, cur_.col); }

    void expect(Tok k, const char* what) {
        if (cur_.kind != k) fail(std::string("expected ") + what);
        shift();
    }

    Rule parse_rule() {
        Rule r;
        r.head = parse_atom(true);
        if (cur_.kind == Tok::Implies) {
            shift();
            while (true) {
                parse_literal(r);
                if (cur_.kind == Tok::Comma) { shift(); continue; }
                break;
            }
        }
        expect(Tok::Dot, "'.' at end of rule");
        return r;
    }

    void parse_literal(Rule& r) {
        switch (cur_.kind) {
            case Tok::Lt: case Tok::Le: case Tok::Gt: case Tok::Ge:
            case Tok::Eq: case Tok::Ne:
                r.builtins.push_back(parse_builtin(symbol_op(cur_.kind)));
                return;
            case Tok::Ident:
                if (is_named_builtin(cur_.text)) {
                    r.builtins.push_back(parse_builtin(named_op(cur_.text)));
                } else {
                    r.body.push_back(parse_atom(false));
                }
                return;
            default:
                fail("expected atom or builtin");
        }
    }

    static BuiltinOp symbol_op(Tok k) {
        switch (k) {
            case Tok::Lt: return BuiltinOp::Lt;
            case Tok::Le: return BuiltinOp::Le;
            case Tok::Gt: return BuiltinOp::Gt;
            case Tok::Ge: return BuiltinOp::Ge;
            case Tok::Eq: return BuiltinOp::Eq;
            default: return BuiltinOp::Ne;
        }
    }
    static BuiltinOp named_op(const std::string& s) {
        if (s == "equals") return BuiltinOp::EqualsStr;
        if (s == "contains") return BuiltinOp::Contains;
        if (s == "starts_with") return BuiltinOp::StartsWith;
        return BuiltinOp::Assign;
    }

    Atom parse_atom(bool is_head) {
        if (cur_.kind != Tok::Ident) fail("expected relation name");
        Atom a;
        a.relation = cur_.text;
        shift();
        expect(Tok::LParen, "'('");
        if (cur_.kind != Tok::RParen) {
            while (true) {
                a.terms.push_back(parse_atom_term());
                if (cur_.kind == Tok::Comma) { shift(); continue; }
                break;
            }
        }
        expect(Tok::RParen, "')'");
        (void)is_head;
        return a;
    }

    Term parse_atom_term() {
        switch (cur_.kind) {
            case Tok::Minus:
                shift();
                return Term::anonymous();
            case Tok::Ident: {
                std::string name = cur_.text;
                shift();
                if (name == "_") return Term::anonymous();
                return Term::variable(std::move(name));
            }
            case Tok::Str: {
                Term t = Term::literal(Constant(cur_.text));
                shift();
                return t;
            }
            case Tok::Int: {
                Term t = Term::literal(Constant(cur_.ival));
                shift();
                return t;
            }
            case Tok::Float: {
                Term t = Term::literal(Constant(cur_.fval));
                shift();
                return t;
            }
            default:
                fail("expected term");
        }
    }

    Builtin parse_builtin(BuiltinOp op) {
        Token at = cur_;
        shift(); // operator token
        expect(Tok::LParen, "'(' after builtin operator");
        Builtin b;
        b.op = op;
        while (true) {
            b.operands.push_back(parse_expr());
            if (cur_.kind == Tok::Comma) { shift(); continue; }
            break;
        }
        expect(Tok::RParen, "')'");
        if (b.operands.size() != 2)
            throw SyntaxError(std::string(builtin_op_name(op)) + " takes exactly 2 operands",
                              at.line, at.col);
        if (op == BuiltinOp::Assign && b.operands[0].kind != Term::Kind::Variable)
            throw SyntaxError("assign target must be a variable", at.line, at.col);
        return b;
    }

    Term parse_expr() {
        switch (cur_.kind) {
            case Tok::Plus: return parse_arith(ArithOp::Add);
            case Tok::Minus: {
                // operator when '(' follows, otherwise rejected: anonymous
                // terms carry no value inside a builtin
                shift();
                if (cur_.kind == Tok::LParen) return parse_arith_body(ArithOp::Sub);
                fail("anonymous term not allowed in builtin");
            }
            case Tok::Star: return parse_arith(ArithOp::Mul);
            case Tok::Slash: return parse_arith(ArithOp::Div);
            case Tok::Ident: {
                std::string name = cur_.text;
                if (name == "min" || name == "max") return parse_aggregate(name == "min" ? AggKind::Min : AggKind::Max);
                if (name == "_") fail("anonymous term not allowed in builtin");
                shift();
                return Term::variable(std::move(name));
            }
            case Tok::Str: {
                Term t = Term::literal(Constant(cur_.text));
                shift();
                return t;
            }
            case Tok::Int: {
                Term t = Term::literal(Constant(cur_.ival));
                shift();
                return t;
            }
            case Tok::Float: {
                Term t = Term::literal(Constant(cur_.fval));
                shift();
                return t;
            }
            default:
                fail("expected expression");
        }
    }

    Term parse_arith(ArithOp op) {
        shift(); // operator
        return parse_arith_body(op);
    }
    Term parse_arith_body(ArithOp op) {
        expect(Tok::LParen, "'(' after arithmetic operator");
        Term l = parse_expr();
        expect(Tok::Comma, "','");
        Term r = parse_expr();
        expect(Tok::RParen, "')'");
        return Term::expression(op, std::move(l), std::move(r));
    }

    Term parse_aggregate(AggKind k) {
        shift(); // min/max
        expect(Tok::LParen, "'('");
        if (cur_.kind != Tok::Ident) fail("expected relation name in aggregate");
        std::string rel = cur_.text;
        shift();
        expect(Tok::Comma, "','");
        if (cur_.kind != Tok::Int || cur_.ival < 0) fail("expected argument position in aggregate");
        size_t pos = static_cast<size_t>(cur_.ival);
        shift();
        expect(Tok::RParen, "')'");
        return Term::aggregate(k, std::move(rel), pos);
    }

    Lexer lex_;
    Token cur_;
};

void collect_expr_vars(const Term& t, std::unordered_set<std::string>& out) {
    switch (t.kind) {
        case Term::Kind::Variable: out.insert(t.var); break;
        case Term::Kind::Expression:
            collect_expr_vars(*t.lhs, out);
            collect_expr_vars(*t.rhs, out);
            break;
        default: break;
    }
}

void collect_expr_aggregates(const Term& t, std::vector<const Term*>& out) {
    switch (t.kind) {
        case Term::Kind::Aggregate: out.push_back(&t); break;
        case Term::Kind::Expression:
            collect_expr_aggregates(*t.lhs, out);
            collect_expr_aggregates(*t.rhs, out);
            break;
        default: break;
    }
}

/// Safety: every head / builtin variable must be bound by a body atom or by
/// an assign whose inputs are themselves bound. Order-insensitive over the
/// builtin list so conjunct order never changes meaning.
void check_safety(const Rule& r, size_t rule_index) {
    std::unordered_set<std::string> bound;
    for (const auto& a : r.body)
        for (const auto& t : a.terms)
            if (t.kind == Term::Kind::Variable) bound.insert(t.var);

    // assign targets must be fresh and uniquely assigned
    std::unordered_set<std::string> targets;
    for (const auto& b : r.builtins) {
        if (b.op != BuiltinOp::Assign) continue;
        const std::string& tgt = b.operands[0].var;
        if (bound.count(tgt))
            throw SafetyViolation(rule_index, tgt, "assign target '" + tgt + "' already bound by a body atom");
        if (!targets.insert(tgt).second)
            throw SafetyViolation(rule_index, tgt, "variable '" + tgt + "' assigned twice");
    }

    // resolve assigns until stable (detects cyclic or unbound inputs)
    std::vector<const Builtin*> pending;
    for (const auto& b : r.builtins)
        if (b.op == BuiltinOp::Assign) pending.push_back(&b);
    bool progress = true;
    while (progress && !pending.empty()) {
        progress = false;
        for (auto it = pending.begin(); it != pending.end();) {
            std::unordered_set<std::string> ins;
            collect_expr_vars((*it)->operands[1], ins);
            bool ok = true;
            for (const auto& v : ins)
                if (!bound.count(v)) { ok = false; break; }
            if (ok) {
                bound.insert((*it)->operands[0].var);
                it = pending.erase(it);
                progress = true;
            } else {
                ++it;
            }
        }
    }
    if (!pending.empty()) {
        std::unordered_set<std::string> ins;
        collect_expr_vars(pending.front()->operands[1], ins);
        std::string missing;
        for (const auto& v : ins)
            if (!bound.count(v)) { missing = v; break; }
        throw SafetyViolation(rule_index, missing,
                              "assign to '" + pending.front()->operands[0].var +
                                  "' uses unbound variable '" + missing + "'");
    }

    for (const auto& b : r.builtins) {
        if (b.op == BuiltinOp::Assign) continue;
        std::unordered_set<std::string> vars;
        for (const auto& t : b.operands) collect_expr_vars(t, vars);
        for (const auto& v : vars)
            if (!bound.count(v))
                throw SafetyViolation(rule_index, v,
                                      std::string(builtin_op_name(b.op)) + " uses unbound variable '" + v + "'");
    }
    for (const auto& t : r.head.terms) {
        if (t.kind == Term::Kind::Variable && !bound.count(t.var))
            throw SafetyViolation(rule_index, t.var, "head variable '" + t.var + "' not bound by body");
    }
}

/// Slot numbering and per-atom bind/check steps; builtins scheduled at the
/// earliest depth where every input is available.
void build_plan(Rule& r, size_t rule_index) {
    auto& plan = r.plan;
    plan.atom_steps.resize(r.body.size());
    plan.key_positions.resize(r.body.size());
    plan.builtins_at.assign(r.body.size() + 1, {});
    plan.assign_slot.assign(r.builtins.size(), UINT32_MAX);

    std::unordered_map<std::string, size_t> var_depth; // depth a variable becomes bound

    auto slot_for = [&](const std::string& name) -> uint32_t {
        auto it = plan.slot_of.find(name);
        if (it != plan.slot_of.end()) return it->second;
        uint32_t s = plan.slot_count++;
        plan.slot_of.emplace(name, s);
        return s;
    };

    for (size_t i = 0; i < r.body.size(); ++i) {
        const Atom& a = r.body[i];
        for (const Term& t : a.terms) {
            Rule::Step step;
            switch (t.kind) {
                case Term::Kind::Variable: {
                    auto seen = plan.slot_of.find(t.var);
                    if (seen == plan.slot_of.end()) {
                        step.op = Rule::Step::Op::Bind;
                        step.slot = slot_for(t.var);
                        var_depth[t.var] = i + 1;
                    } else {
                        step.op = Rule::Step::Op::CheckSlot;
                        step.slot = seen->second;
                        if (var_depth[t.var] == i + 1) {
                            // repeated within this same atom: still a check,
                            // but not usable as a join key
                        } else {
                            plan.key_positions[i].push_back(static_cast<uint32_t>(&t - a.terms.data()));
                        }
                    }
                    break;
                }
                case Term::Kind::Anonymous:
                    step.op = Rule::Step::Op::Bind;
                    step.slot = UINT32_MAX; // discard
                    break;
                case Term::Kind::Literal:
                    step.op = Rule::Step::Op::CheckLit;
                    step.lit = t.value;
                    break;
                default:
                    throw SyntaxError("expression term inside ordinary atom", 0, 0);
            }
            plan.atom_steps[i].push_back(std::move(step));
        }
    }

    // schedule builtins: tests at max input depth, assigns once inputs are
    // ready; an assign's target inherits that depth for its dependents
    std::vector<bool> scheduled(r.builtins.size(), false);
    size_t remaining = r.builtins.size();
    while (remaining > 0) {
        bool progress = false;
        for (size_t bi = 0; bi < r.builtins.size(); ++bi) {
            if (scheduled[bi]) continue;
            const Builtin& b = r.builtins[bi];
            std::unordered_set<std::string> ins;
            if (b.op == BuiltinOp::Assign) {
                collect_expr_vars(b.operands[1], ins);
            } else {
                for (const auto& t : b.operands) collect_expr_vars(t, ins);
            }
            size_t depth = 0;
            bool ready = true;
            for (const auto& v : ins) {
                auto it = var_depth.find(v);
                if (it == var_depth.end()) { ready = false; break; }
                depth = std::max(depth, it->second);
            }
            if (!ready) continue;
            plan.builtins_at[depth].push_back(bi);
            scheduled[bi] = true;
            --remaining;
            progress = true;
            if (b.op == BuiltinOp::Assign) {
                const std::string& tgt = b.operands[0].var;
                plan.assign_slot[bi] = slot_for(tgt);
                var_depth[tgt] = depth;
            }
        }
        if (!progress)
            throw SafetyViolation(rule_index, "", "unschedulable builtin (cyclic assigns)");
    }

    for (const Term& t : r.head.terms) {
        Rule::HeadStep hs;
        switch (t.kind) {
            case Term::Kind::Variable:
                hs.src = Rule::HeadStep::Src::Slot;
                hs.slot = plan.slot_of.at(t.var);
                break;
            case Term::Kind::Anonymous:
                hs.src = Rule::HeadStep::Src::Null;
                break;
            case Term::Kind::Literal:
                hs.src = Rule::HeadStep::Src::Lit;
                hs.lit = t.value;
                break;
            default:
                throw SyntaxError("expression term in rule head", 0, 0);
        }
        plan.head_out.push_back(std::move(hs));
    }
}

/// Rule execution order for programs whose head-dependency graph is
/// acyclic: every rule deriving a relation is ordered before any rule
/// consuming it, so one pass reaches the fixpoint. Recursive programs get
/// an empty order and iterate until stable.
void compute_pass_order(Program& p) {
    std::unordered_map<std::string, std::unordered_set<std::string>> deps;
    for (const auto& name : p.intensional) deps[name];
    for (const auto& r : p.rules)
        for (const auto& a : r.body)
            if (p.intensional.count(a.relation)) deps[r.head.relation].insert(a.relation);

    std::unordered_map<std::string, size_t> rank;
    bool progress = true;
    while (progress && rank.size() < deps.size()) {
        progress = false;
        for (const auto& [name, ds] : deps) {
            if (rank.count(name)) continue;
            size_t r = 0;
            bool ready = true;
            for (const auto& d : ds) {
                auto it = rank.find(d);
                if (it == rank.end()) { ready = false; break; }
                r = std::max(r, it->second + 1);
            }
            if (ready) {
                rank.emplace(name, r);
                progress = true;
            }
        }
    }
    p.recursive = rank.size() < deps.size();
    if (p.recursive) return;
    p.single_pass_order.resize(p.rules.size());
    for (size_t i = 0; i < p.single_pass_order.size(); ++i) p.single_pass_order[i] = i;
    std::stable_sort(p.single_pass_order.begin(), p.single_pass_order.end(),
                     [&](size_t a, size_t b) {
                         return rank.at(p.rules[a].head.relation) <
                                rank.at(p.rules[b].head.relation);
                     });
}

void check_arities(Program& p) {
    auto note = [&](const std::string& rel, size_t arity) {
        auto [it, fresh] = p.arities.emplace(rel, arity);
        if (!fresh && it->second != arity)
            throw ArityMismatch(rel, "relation " + rel + " used with arity " + std::to_string(arity) +
                                         " and " + std::to_string(it->second));
    };
    for (const auto& r : p.rules) {
        note(r.head.relation, r.head.arity());
        for (const auto& a : r.body) note(a.relation, a.arity());
    }
}

/// Aggregated relations must not depend on the relation being derived;
/// the engine has no stratification to order such cycles.
void check_aggregate_deps(const Program& p) {
    // direct dependencies: head -> body relations
    std::unordered_map<std::string, std::unordered_set<std::string>> deps;
    for (const auto& r : p.rules)
        for (const auto& a : r.body) deps[r.head.relation].insert(a.relation);

    auto depends_on = [&](const std::string& from, const std::string& target) {
        std::vector<std::string> stack{from};
        std::unordered_set<std::string> seen;
        while (!stack.empty()) {
            std::string cur = stack.back();
            stack.pop_back();
            if (cur == target) return true;
            if (!seen.insert(cur).second) continue;
            auto it = deps.find(cur);
            if (it != deps.end())
                for (const auto& n : it->second) stack.push_back(n);
        }
        return false;
    };

    for (size_t ri = 0; ri < p.rules.size(); ++ri) {
        const Rule& r = p.rules[ri];
        std::vector<const Term*> aggs;
        for (const auto& b : r.builtins)
            for (const auto& t : b.operands) collect_expr_aggregates(t, aggs);
        for (const Term* t : aggs) {
            if (depends_on(t->agg_relation, r.head.relation))
                throw SafetyViolation(ri, t->agg_relation,
                                      "aggregate over '" + t->agg_relation +
                                          "' depends recursively on '" + r.head.relation + "'");
        }
    }
}

} // namespace

std::unordered_set<std::string> Program::body_relations() const {
    std::unordered_set<std::string> out;
    for (const auto& r : rules)
        for (const auto& a : r.body) out.insert(a.relation);
    return out;
}

bool Program::record_local(const std::string& goal) const {
    std::unordered_set<std::string> relevant{goal};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& r : rules) {
            if (!relevant.count(r.head.relation)) continue;
            for (const auto& a : r.body)
                if (intensional.count(a.relation) && relevant.insert(a.relation).second) grew = true;
        }
    }
    bool any = false;
    for (const auto& r : rules) {
        if (!relevant.count(r.head.relation)) continue;
        any = true;
        if (r.head.terms.empty() || r.head.terms[0].kind != Term::Kind::Variable) return false;
        const std::string& idvar = r.head.terms[0].var;
        for (const auto& a : r.body) {
            if (a.terms.empty() || a.terms[0].kind != Term::Kind::Variable ||
                a.terms[0].var != idvar)
                return false;
        }
        if (r.body.empty()) return false;
    }
    return any;
}

Program parse_program(std::string_view text) {
    Program p;
    p.rules = Parser(text).parse();
    for (size_t i = 0; i < p.rules.size(); ++i) check_safety(p.rules[i], i);
    check_arities(p);
    for (const auto& r : p.rules) p.intensional.insert(r.head.relation);
    check_aggregate_deps(p);
    compute_pass_order(p);
    for (size_t i = 0; i < p.rules.size(); ++i) build_plan(p.rules[i], i);
    return p;
}

ProgramPtr parse_program_shared(std::string_view text) {
    return std::make_shared<const Program>(parse_program(text));
}

ProgramPtr parse_program_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open program file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_program_shared(ss.str());
}

Database parse_facts(std::string_view text) {
    Program p = parse_program(text);
    Database db;
    std::unordered_map<std::string, Relation> rels;
    for (const auto& r : p.rules) {
        if (!r.body.empty() || !r.builtins.empty())
            throw SyntaxError("fact file contains a rule with a body: " + r.head.relation, 0, 0);
        Tuple t;
        t.reserve(r.head.terms.size());
        for (const auto& term : r.head.terms) {
            if (term.kind == Term::Kind::Literal) t.push_back(term.value);
            else if (term.kind == Term::Kind::Anonymous) t.push_back(Constant());
            else throw SyntaxError("fact file contains a non-ground fact: " + r.head.relation, 0, 0);
        }
        auto it = rels.find(r.head.relation);
        if (it == rels.end())
            it = rels.emplace(r.head.relation, Relation(r.head.relation, t.size())).first;
        it->second.insert(std::move(t));
    }
    for (auto& [_, rel] : rels) db.put(std::move(rel));
    return db;
}

Database parse_facts_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open facts file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_facts(ss.str());
}

} // namespace tipflow::datalog
