#include "tipflow/eval.hpp"

#include <algorithm>
#include <functional>

#include "tipflow/errors.hpp"

namespace tipflow::datalog {

namespace {

/// Extensional relations from the input database overlaid with the
/// intensional relations accumulated so far.
struct View {
    const Database* base = nullptr;
    const std::unordered_map<std::string, std::shared_ptr<Relation>>* derived = nullptr;

    const Relation* find(const std::string& name) const {
        if (derived) {
            auto it = derived->find(name);
            if (it != derived->end()) return it->second.get();
        }
        return base ? base->find(name) : nullptr;
    }
};

Constant arith(ArithOp op, const Constant& a, const Constant& b) {
    if (!a.is_numeric() || !b.is_numeric())
        throw TypeError("arithmetic requires numeric operands");
    if (a.is_int() && b.is_int()) {
        int64_t x = a.as_int(), y = b.as_int();
        switch (op) {
            case ArithOp::Add: return Constant(x + y);
            case ArithOp::Sub: return Constant(x - y);
            case ArithOp::Mul: return Constant(x * y);
            case ArithOp::Div:
                if (y == 0) throw TypeError("division by zero");
                return Constant(x / y);
        }
    }
    double x = a.numeric(), y = b.numeric();
    switch (op) {
        case ArithOp::Add: return Constant(x + y);
        case ArithOp::Sub: return Constant(x - y);
        case ArithOp::Mul: return Constant(x * y);
        default:
            if (y == 0.0) throw TypeError("division by zero");
            return Constant(x / y);
    }
}

Constant eval_aggregate(const Term& t, const View& view) {
    const Relation* rel = view.find(t.agg_relation);
    if (!rel || rel->empty())
        throw EmptyAggregate((t.agg == AggKind::Min ? std::string("min") : std::string("max")) +
                             " over empty relation: " + t.agg_relation);
    if (t.agg_position >= rel->arity())
        throw TypeError("aggregate position " + std::to_string(t.agg_position) +
                        " out of range for " + t.agg_relation);
    const Constant* best = nullptr;
    bool strings = false;
    for (const Tuple& row : *rel) {
        const Constant& c = row[t.agg_position];
        if (c.is_null()) throw TypeError("aggregate over null value in " + t.agg_relation);
        if (!best) {
            best = &c;
            strings = c.is_str();
            continue;
        }
        if (c.is_str() != strings)
            throw TypeError("aggregate over mixed string/numeric column in " + t.agg_relation);
        bool less = strings ? c.str() < best->str() : c.numeric() < best->numeric();
        if ((t.agg == AggKind::Min) == less) best = &c;
    }
    return *best;
}

template <typename Lookup>
Constant eval_term(const Term& t, const Lookup& lookup, const View& view,
                   std::unordered_map<const Term*, Constant>* agg_memo) {
    switch (t.kind) {
        case Term::Kind::Literal: return t.value;
        case Term::Kind::Variable: return lookup(t.var);
        case Term::Kind::Expression:
            return arith(t.op, eval_term(*t.lhs, lookup, view, agg_memo),
                         eval_term(*t.rhs, lookup, view, agg_memo));
        case Term::Kind::Aggregate: {
            if (agg_memo) {
                auto it = agg_memo->find(&t);
                if (it != agg_memo->end()) return it->second;
                Constant v = eval_aggregate(t, view);
                agg_memo->emplace(&t, v);
                return v;
            }
            return eval_aggregate(t, view);
        }
        default:
            throw TypeError("anonymous term has no value");
    }
}

bool numeric_compare(BuiltinOp op, const Constant& a, const Constant& b) {
    if (!a.is_numeric() || !b.is_numeric())
        throw TypeError(std::string(builtin_op_name(op)) + " requires numeric operands");
    if (a.is_int() && b.is_int()) {
        int64_t x = a.as_int(), y = b.as_int();
        switch (op) {
            case BuiltinOp::Lt: return x < y;
            case BuiltinOp::Le: return x <= y;
            case BuiltinOp::Gt: return x > y;
            default: return x >= y;
        }
    }
    double x = a.numeric(), y = b.numeric();
    switch (op) {
        case BuiltinOp::Lt: return x < y;
        case BuiltinOp::Le: return x <= y;
        case BuiltinOp::Gt: return x > y;
        default: return x >= y;
    }
}

bool string_test(BuiltinOp op, const Constant& a, const Constant& b) {
    if (!a.is_str() || !b.is_str())
        throw TypeError(std::string(builtin_op_name(op)) + " requires string operands");
    switch (op) {
        case BuiltinOp::EqualsStr: return a.str() == b.str();
        case BuiltinOp::Contains: return a.str().find(b.str()) != std::string::npos;
        default: return a.str().rfind(b.str(), 0) == 0;
    }
}

bool builtin_test(BuiltinOp op, const Constant& a, const Constant& b) {
    switch (op) {
        case BuiltinOp::Lt:
        case BuiltinOp::Le:
        case BuiltinOp::Gt:
        case BuiltinOp::Ge: return numeric_compare(op, a, b);
        case BuiltinOp::Eq: return a == b;
        case BuiltinOp::Ne: return a != b;
        default: return string_test(op, a, b);
    }
}

/// Depth-first enumeration of one rule's bindings over a database view.
/// Hash mode indexes each atom's tuples on the positions already bound by
/// earlier atoms; nested-loop mode scans and checks. Slots hold pointers
/// into the matched tuples (or into assign results), so binding a variable
/// never copies a constant.
class RuleRunner {
public:
    RuleRunner(const Rule& rule, const View& view, JoinMode mode)
        : rule_(rule), plan_(rule.plan), view_(view), mode_(mode) {
        slots_.resize(plan_.slot_count, nullptr);
        assign_values_.resize(rule.builtins.size());
        atoms_.resize(rule.body.size());
        for (size_t i = 0; i < rule.body.size(); ++i) prepare_atom(i);
    }

    /// Returns false when the sink requested a stop.
    bool run(const std::function<bool(Tuple&&)>& sink) {
        sink_ = &sink;
        if (!run_builtins(0)) return true;
        return descend(0);
    }

private:
    // Row indexes, not pointers: a recursive rule inserts into the very
    // relation it scans, and the row vector may reallocate underneath.
    // Indexes below the snapshot size stay valid; slot pointers point into
    // tuple element storage, which reallocation never moves.
    struct AtomState {
        const Relation* rel = nullptr;
        std::vector<uint32_t> rows;
        std::unordered_map<Tuple, std::vector<uint32_t>, TupleHash> index;
        bool keyed = false;
        bool missing = false;
    };

    void prepare_atom(size_t i) {
        AtomState& st = atoms_[i];
        st.rel = view_.find(rule_.body[i].relation);
        if (!st.rel) {
            st.missing = true;
            return;
        }
        const auto& steps = plan_.atom_steps[i];
        auto lit_ok = [&](const Tuple& t) {
            for (size_t p = 0; p < steps.size(); ++p)
                if (steps[p].op == Rule::Step::Op::CheckLit && !(t[p] == steps[p].lit)) return false;
            return true;
        };
        const auto& rows = st.rel->rows();
        st.keyed = mode_ == JoinMode::Hash && !plan_.key_positions[i].empty();
        if (st.keyed) {
            const auto& keys = plan_.key_positions[i];
            for (uint32_t r = 0; r < rows.size(); ++r) {
                if (!lit_ok(rows[r])) continue;
                Tuple key;
                key.reserve(keys.size());
                for (uint32_t p : keys) key.push_back(rows[r][p]);
                st.index[std::move(key)].push_back(r);
            }
        } else {
            st.rows.reserve(rows.size());
            for (uint32_t r = 0; r < rows.size(); ++r)
                if (lit_ok(rows[r])) st.rows.push_back(r);
        }
    }

    bool run_builtins(size_t depth) {
        for (size_t bi : plan_.builtins_at[depth]) {
            const Builtin& b = rule_.builtins[bi];
            auto lookup = [&](const std::string& name) -> Constant {
                return *slots_[plan_.slot_of.at(name)];
            };
            if (b.op == BuiltinOp::Assign) {
                assign_values_[bi] = eval_term(b.operands[1], lookup, view_, &agg_memo_);
                slots_[plan_.assign_slot[bi]] = &assign_values_[bi];
            } else {
                Constant a = eval_term(b.operands[0], lookup, view_, &agg_memo_);
                Constant c = eval_term(b.operands[1], lookup, view_, &agg_memo_);
                if (!builtin_test(b.op, a, c)) return false;
            }
        }
        return true;
    }

    bool emit() {
        Tuple out;
        out.reserve(plan_.head_out.size());
        for (const auto& hs : plan_.head_out) {
            switch (hs.src) {
                case Rule::HeadStep::Src::Slot: out.push_back(*slots_[hs.slot]); break;
                case Rule::HeadStep::Src::Lit: out.push_back(hs.lit); break;
                default: out.push_back(Constant()); break;
            }
        }
        return (*sink_)(std::move(out));
    }

    bool match_row(size_t i, const Tuple& row, bool skip_keys) {
        const auto& steps = plan_.atom_steps[i];
        const auto& keys = plan_.key_positions[i];
        for (size_t p = 0; p < steps.size(); ++p) {
            const auto& s = steps[p];
            switch (s.op) {
                case Rule::Step::Op::Bind:
                    if (s.slot != UINT32_MAX) slots_[s.slot] = &row[p];
                    break;
                case Rule::Step::Op::CheckSlot: {
                    if (skip_keys &&
                        std::find(keys.begin(), keys.end(), static_cast<uint32_t>(p)) != keys.end())
                        break; // hash lookup already matched this position
                    if (!(*slots_[s.slot] == row[p])) return false;
                    break;
                }
                default: break; // literals pre-filtered
            }
        }
        return true;
    }

    bool descend(size_t depth) {
        if (depth == rule_.body.size()) return emit();
        AtomState& st = atoms_[depth];
        if (st.missing) return true;
        if (st.keyed) {
            const auto& keys = plan_.key_positions[depth];
            Tuple probe;
            probe.reserve(keys.size());
            for (uint32_t p : keys) probe.push_back(*slots_[plan_.atom_steps[depth][p].slot]);
            auto it = st.index.find(probe);
            if (it == st.index.end()) return true;
            const auto& rows = st.rel->rows();
            for (uint32_t r : it->second) {
                if (!match_row(depth, rows[r], true)) continue;
                if (!run_builtins(depth + 1)) continue;
                if (!descend(depth + 1)) return false;
            }
        } else {
            const auto& rows = st.rel->rows();
            for (uint32_t r : st.rows) {
                if (!match_row(depth, rows[r], false)) continue;
                if (!run_builtins(depth + 1)) continue;
                if (!descend(depth + 1)) return false;
            }
        }
        return true;
    }

    const Rule& rule_;
    const Rule::Plan& plan_;
    View view_;
    JoinMode mode_;
    std::vector<const Constant*> slots_;
    std::vector<Constant> assign_values_;
    std::vector<AtomState> atoms_;
    std::unordered_map<const Term*, Constant> agg_memo_;
    const std::function<bool(Tuple&&)>* sink_ = nullptr;
};

} // namespace

Database evaluate(const Program& program, const Database& db, const EvalOptions& opts) {
    for (const auto& [name, arity] : program.arities) {
        const Relation* r = db.find(name);
        if (r && r->arity() != arity)
            throw ArityMismatch(name, "relation " + name + ": program arity " + std::to_string(arity) +
                                          " vs database arity " + std::to_string(r->arity()));
    }

    std::unordered_map<std::string, std::shared_ptr<Relation>> derived;
    for (const auto& name : program.intensional) {
        auto rel = std::make_shared<Relation>(name, program.arities.at(name));
        if (const Relation* seed = db.find(name))
            for (const Tuple& t : *seed) rel->insert(t);
        derived.emplace(name, rel);
    }

    View view{&db, &derived};
    auto goal_satisfied = [&] {
        if (!opts.exists_goal) return false;
        const Relation* g = view.find(*opts.exists_goal);
        return g && !g->empty();
    };

    if (!goal_satisfied()) {
        auto apply = [&](const Rule& rule, bool* changed) {
            Relation* out = derived.at(rule.head.relation).get();
            bool exits = opts.exists_goal && *opts.exists_goal == rule.head.relation;
            RuleRunner runner(rule, view, opts.join);
            return runner.run([&](Tuple&& t) {
                if (out->insert(std::move(t))) {
                    if (changed) *changed = true;
                    if (exits) return false;
                }
                return true;
            });
        };

        if (!program.recursive) {
            // one pass in dependency order is the fixpoint
            for (size_t idx : program.single_pass_order)
                if (!apply(program.rules[idx], nullptr)) break;
        } else {
            bool changed = true;
            while (changed) {
                changed = false;
                bool stop = false;
                for (const Rule& rule : program.rules)
                    if (!apply(rule, &changed)) { stop = true; break; }
                if (stop) break;
            }
        }
    }

    Database result = db;
    for (auto& [name, rel] : derived) result.put(RelationPtr(std::move(rel)));
    return result;
}

std::unordered_set<Tuple, TupleHash> apply_rule(const Rule& rule, const Database& db,
                                                const EvalOptions& opts) {
    View view{&db, nullptr};
    std::unordered_set<Tuple, TupleHash> out;
    RuleRunner runner(rule, view, opts.join);
    runner.run([&](Tuple&& t) {
        out.insert(std::move(t));
        return true;
    });
    return out;
}

std::variant<bool, Bindings> eval_builtin(const Builtin& b, const Bindings& bindings,
                                          const Database* db) {
    View view{db, nullptr};
    auto lookup = [&](const std::string& name) -> Constant {
        auto it = bindings.find(name);
        if (it == bindings.end()) throw TypeError("unbound variable: " + name);
        return it->second;
    };
    if (b.op == BuiltinOp::Assign) {
        Bindings extended = bindings;
        extended[b.operands[0].var] = eval_term(b.operands[1], lookup, view, nullptr);
        return extended;
    }
    Constant a = eval_term(b.operands[0], lookup, view, nullptr);
    Constant c = eval_term(b.operands[1], lookup, view, nullptr);
    return builtin_test(b.op, a, c);
}

} // namespace tipflow::datalog
