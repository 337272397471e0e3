#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tipflow {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- datalog_core ---

struct SyntaxError : Error {
    size_t line = 0;
    size_t col = 0;
    SyntaxError(const std::string& msg, size_t line_, size_t col_)
        : Error(msg + " (line " + std::to_string(line_) + ", col " + std::to_string(col_) + ")"),
          line(line_), col(col_) {}
};

struct SafetyViolation : Error {
    size_t rule_index = 0;
    std::string variable;
    SafetyViolation(size_t rule, std::string var, const std::string& what_)
        : Error("rule " + std::to_string(rule) + ": " + what_),
          rule_index(rule), variable(std::move(var)) {}
};

struct ArityMismatch : Error {
    std::string relation;
    explicit ArityMismatch(std::string rel, const std::string& msg)
        : Error(msg), relation(std::move(rel)) {}
};

struct TypeError : Error {
    using Error::Error;
};

struct EmptyAggregate : Error {
    using Error::Error;
};

// --- cdm ---

struct MissingField : Error {
    std::string field;
    explicit MissingField(std::string name)
        : Error("missing field: " + name), field(std::move(name)) {}
};

struct TypeMismatch : Error {
    std::string field;
    explicit TypeMismatch(std::string name, const std::string& detail)
        : Error("field " + name + ": " + detail), field(std::move(name)) {}
};

struct SchemaMismatch : Error {
    using Error::Error;
};

// --- patterns ---

struct AmbiguousCorrelation : Error {
    using Error::Error;
};

struct NoRecipientResolved : Error {
    using Error::Error;
};

// --- pipeline / bench / cli ---

struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace tipflow
