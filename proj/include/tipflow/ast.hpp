#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tipflow/constant.hpp"

namespace tipflow::datalog {

enum class AggKind { Min, Max };
enum class ArithOp { Add, Sub, Mul, Div };

/// Argument of an atom or builtin. Ordinary atoms carry only variables,
/// anonymous wildcards and literals; expression and aggregate terms are
/// confined to builtin operands.
struct Term {
    enum class Kind { Variable, Anonymous, Literal, Expression, Aggregate };

    Kind kind = Kind::Anonymous;
    std::string var;                        // Variable
    Constant value;                         // Literal
    ArithOp op = ArithOp::Add;              // Expression
    std::shared_ptr<const Term> lhs, rhs;   // Expression children
    AggKind agg = AggKind::Min;             // Aggregate
    std::string agg_relation;
    size_t agg_position = 0;

    static Term variable(std::string name) {
        Term t;
        t.kind = Kind::Variable;
        t.var = std::move(name);
        return t;
    }
    static Term anonymous() { return Term{}; }
    static Term literal(Constant c) {
        Term t;
        t.kind = Kind::Literal;
        t.value = std::move(c);
        return t;
    }
    static Term expression(ArithOp op, Term l, Term r) {
        Term t;
        t.kind = Kind::Expression;
        t.op = op;
        t.lhs = std::make_shared<const Term>(std::move(l));
        t.rhs = std::make_shared<const Term>(std::move(r));
        return t;
    }
    static Term aggregate(AggKind k, std::string rel, size_t pos) {
        Term t;
        t.kind = Kind::Aggregate;
        t.agg = k;
        t.agg_relation = std::move(rel);
        t.agg_position = pos;
        return t;
    }
};

struct Atom {
    std::string relation;
    std::vector<Term> terms;
    size_t arity() const { return terms.size(); }
};

enum class BuiltinOp { Lt, Le, Gt, Ge, Eq, Ne, EqualsStr, Contains, StartsWith, Assign };

struct Builtin {
    BuiltinOp op;
    std::vector<Term> operands; // Assign: operands[0] is the target variable
};

const char* builtin_op_name(BuiltinOp op);

/// One Datalog rule plus its evaluation plan. The plan is fixed at parse
/// time: variables are numbered into slots, every atom position becomes a
/// bind/check step, and builtins are scheduled at the earliest body depth
/// where their operands are bound.
struct Rule {
    Atom head;
    std::vector<Atom> body;
    std::vector<Builtin> builtins;

    struct Step {
        enum class Op { Bind, CheckSlot, CheckLit };
        Op op;
        uint32_t slot = 0;
        Constant lit;
    };
    struct HeadStep {
        enum class Src { Slot, Lit, Null };
        Src src;
        uint32_t slot = 0;
        Constant lit;
    };
    struct Plan {
        uint32_t slot_count = 0;
        std::unordered_map<std::string, uint32_t> slot_of;
        std::vector<std::vector<Step>> atom_steps;        // per body atom
        std::vector<std::vector<uint32_t>> key_positions; // CheckSlot positions per atom
        std::vector<std::vector<size_t>> builtins_at;     // builtin indices per depth 0..body.size()
        std::vector<HeadStep> head_out;
        std::vector<uint32_t> assign_slot;                // per builtin; UINT32_MAX if not assign
    };
    Plan plan;
};

/// Parsed program: rules plus the analysis the evaluator and the patterns
/// layer rely on.
struct Program {
    std::vector<Rule> rules;

    std::unordered_map<std::string, size_t> arities; // every relation mentioned
    std::unordered_set<std::string> intensional;     // relations appearing in some head

    /// Rule indexes in dependency order when the head graph is acyclic
    /// (one pass reaches the fixpoint); empty for recursive programs,
    /// which iterate until stable.
    std::vector<size_t> single_pass_order;
    bool recursive = false;

    bool is_intensional(std::string_view name) const {
        return intensional.count(std::string(name)) != 0;
    }

    /// Relation names appearing in any rule body (the translator's
    /// replacement scope).
    std::unordered_set<std::string> body_relations() const;

    /// True when every rule reachable from `goal` carries one record
    /// identifier variable through position 0 of the head and of every body
    /// atom. Such a goal can be evaluated once over a multi-record body and
    /// partitioned by the head's first column.
    bool record_local(const std::string& goal) const;
};

using ProgramPtr = std::shared_ptr<const Program>;

} // namespace tipflow::datalog
