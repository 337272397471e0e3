#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "tipflow/ast.hpp"
#include "tipflow/relation.hpp"

namespace tipflow::datalog {

/// Parse Datalog text into a validated Program.
///
/// Syntax (matching the routing/translation listings):
///   rule      :=  atom [ ":-" literal { "," literal } ] "."
///   literal   :=  atom | builtin
///   atom      :=  ident "(" [ term { "," term } ] ")"
///   term      :=  "-" | "_"            anonymous wildcard
///              |  ident                variable (unquoted names are never constants)
///              |  number | string      constant
///   builtin   :=  ("<"|"<="|">"|">="|"="|"!=") "(" expr "," expr ")"
///              |  ("equals"|"contains"|"starts_with") "(" expr "," expr ")"
///              |  "assign" "(" variable "," expr ")"
///   expr      :=  term-without-anonymous
///              |  ("+"|"-"|"*"|"/") "(" expr "," expr ")"
///              |  ("min"|"max") "(" ident "," integer ")"
///   "%" starts a line comment. Relation and variable names may contain "-"
///   when followed by a letter (cbr-order); a lone "-" is the wildcard.
///
/// Throws SyntaxError, SafetyViolation or ArityMismatch.
Program parse_program(std::string_view text);
ProgramPtr parse_program_shared(std::string_view text);
ProgramPtr parse_program_file(const std::filesystem::path& path);

/// Load a fact file: every statement must be a ground, body-free atom.
/// Returns the facts as a Database.
Database parse_facts(std::string_view text);
Database parse_facts_file(const std::filesystem::path& path);

} // namespace tipflow::datalog
