#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <variant>

#include "tipflow/ast.hpp"
#include "tipflow/relation.hpp"

namespace tipflow::datalog {

enum class JoinMode { Hash, NestedLoop };

struct EvalOptions {
    JoinMode join = JoinMode::Hash;
    /// When set, evaluation returns as soon as this relation has one tuple
    /// (early-exit mode for boolean routing conditions). Off by default.
    std::optional<std::string> exists_goal;
};

/// Naive bottom-up fixpoint: full re-derivation each pass until no rule
/// adds a tuple. Input relations are shared, not copied; the result holds
/// the input relations plus every intensional relation at its least
/// fixpoint. Tuples already present in `db` for intensional relations are
/// kept as seeds, which makes evaluate idempotent.
Database evaluate(const Program& program, const Database& db, const EvalOptions& opts = {});

/// One application round of a single rule against a database snapshot.
std::unordered_set<Tuple, TupleHash> apply_rule(const Rule& rule, const Database& db,
                                                const EvalOptions& opts = {});

using Bindings = std::map<std::string, Constant>;

/// Evaluate one builtin under explicit variable bindings. Test operators
/// yield bool; assign yields the extended bindings. Aggregates read from
/// `db` when given.
std::variant<bool, Bindings> eval_builtin(const Builtin& b, const Bindings& bindings,
                                          const Database* db = nullptr);

} // namespace tipflow::datalog
