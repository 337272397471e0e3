#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace tipflow::datalog {

/// Ground value in a fact tuple: string, 64-bit int, or 64-bit float.
/// Equality is type-sensitive except that int/float comparison coerces the
/// integer to float, so 3 == 3.0 but 3 != "3". Hashing of the numeric kinds
/// goes through double so equal values land in the same bucket.
///
/// The null kind is the distinguished constant emitted for an anonymous
/// term in a rule head; it equals only itself.
class Constant {
public:
    enum class Kind { Null, Str, Int, Float };

    Constant() : v_(std::monostate{}) {}
    Constant(std::string s) : v_(std::move(s)) {}
    Constant(const char* s) : v_(std::string(s)) {}
    Constant(int64_t i) : v_(i) {}
    Constant(int i) : v_(static_cast<int64_t>(i)) {}
    Constant(double d) : v_(d) {}

    Kind kind() const { return static_cast<Kind>(v_.index()); }
    bool is_null() const { return kind() == Kind::Null; }
    bool is_str() const { return kind() == Kind::Str; }
    bool is_int() const { return kind() == Kind::Int; }
    bool is_float() const { return kind() == Kind::Float; }
    bool is_numeric() const { return is_int() || is_float(); }

    const std::string& str() const { return std::get<std::string>(v_); }
    int64_t as_int() const { return std::get<int64_t>(v_); }

    /// Numeric value as double (int coerced); only valid when is_numeric().
    double numeric() const {
        return is_int() ? static_cast<double>(std::get<int64_t>(v_)) : std::get<double>(v_);
    }

    bool operator==(const Constant& o) const {
        if (v_.index() == o.v_.index()) return v_ == o.v_;
        if (is_numeric() && o.is_numeric()) return numeric() == o.numeric();
        return false;
    }
    bool operator!=(const Constant& o) const { return !(*this == o); }

    /// Total order: null < numeric < string. Int/float are merged on value,
    /// consistent with operator==.
    bool operator<(const Constant& o) const {
        int ra = rank(), rb = o.rank();
        if (ra != rb) return ra < rb;
        switch (ra) {
            case 0: return false;
            case 1:
                if (is_int() && o.is_int()) return as_int() < o.as_int();
                return numeric() < o.numeric();
            default: return str() < o.str();
        }
    }

    size_t hash() const {
        switch (kind()) {
            case Kind::Null: return 0x9e3779b97f4a7c15ULL;
            case Kind::Str: return std::hash<std::string>{}(str());
            default: {
                double d = numeric();
                if (d == 0.0) d = 0.0; // fold -0.0
                return std::hash<double>{}(d);
            }
        }
    }

    /// Display form: strings raw, numbers round-trippable, null as "null".
    std::string to_text() const {
        switch (kind()) {
            case Kind::Null: return "null";
            case Kind::Str: return str();
            case Kind::Int: return std::to_string(as_int());
            default: {
                char buf[32];
                auto [p, ec] = std::to_chars(buf, buf + sizeof buf, std::get<double>(v_));
                return std::string(buf, p);
            }
        }
    }

    /// Parseable form: like to_text() but strings are quoted and escaped.
    std::string to_literal() const {
        if (!is_str()) return to_text();
        std::string out = "\"";
        for (char c : str()) {
            if (c == '"' || c == '\\') out.push_back('\\');
            out.push_back(c);
        }
        out.push_back('"');
        return out;
    }

private:
    int rank() const {
        switch (kind()) {
            case Kind::Null: return 0;
            case Kind::Int:
            case Kind::Float: return 1;
            default: return 2;
        }
    }

    std::variant<std::monostate, std::string, int64_t, double> v_;
};

using Tuple = std::vector<Constant>;

inline size_t hash_combine(size_t seed, size_t h) {
    return seed ^ (h + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

struct ConstantHash {
    size_t operator()(const Constant& c) const { return c.hash(); }
};

struct TupleHash {
    size_t operator()(const Tuple& t) const {
        size_t seed = t.size();
        for (const auto& c : t) seed = hash_combine(seed, c.hash());
        return seed;
    }
};

struct TupleLess {
    bool operator()(const Tuple& a, const Tuple& b) const {
        size_t n = a.size() < b.size() ? a.size() : b.size();
        for (size_t i = 0; i < n; ++i) {
            if (a[i] < b[i]) return true;
            if (b[i] < a[i]) return false;
        }
        return a.size() < b.size();
    }
};

} // namespace tipflow::datalog
