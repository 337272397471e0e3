#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "tipflow/constant.hpp"
#include "tipflow/errors.hpp"

namespace tipflow::datalog {

/// Named set of tuples with fixed arity. Set semantics: insert of a
/// duplicate is a no-op and reports false. Rows live in one contiguous
/// vector (insertion order, cache-friendly scans); an open-addressing
/// index over row numbers provides the duplicate check without per-insert
/// node allocations.
class Relation {
public:
    using Rows = std::vector<Tuple>;

    Relation(std::string name, size_t arity) : name_(std::move(name)), arity_(arity) {}

    const std::string& name() const { return name_; }
    size_t arity() const { return arity_; }
    size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }

    bool insert(Tuple t) {
        if (t.size() != arity_)
            throw ArityMismatch(name_, "relation " + name_ + ": tuple arity " +
                                           std::to_string(t.size()) + " != " + std::to_string(arity_));
        if ((rows_.size() + 1) * 10 >= buckets_.size() * 7) grow();
        size_t h = TupleHash{}(t);
        size_t p = h & mask_;
        while (buckets_[p]) {
            if (rows_[buckets_[p] - 1] == t) return false;
            p = (p + 1) & mask_;
        }
        buckets_[p] = static_cast<uint32_t>(rows_.size()) + 1;
        rows_.push_back(std::move(t));
        return true;
    }

    bool contains(const Tuple& t) const {
        if (buckets_.empty()) return false;
        size_t p = TupleHash{}(t) & mask_;
        while (buckets_[p]) {
            if (rows_[buckets_[p] - 1] == t) return true;
            p = (p + 1) & mask_;
        }
        return false;
    }

    void reserve(size_t n) { rows_.reserve(n); }

    Rows::const_iterator begin() const { return rows_.begin(); }
    Rows::const_iterator end() const { return rows_.end(); }
    const Rows& rows() const { return rows_; }

private:
    void grow() {
        size_t cap = buckets_.empty() ? 16 : buckets_.size() * 2;
        buckets_.assign(cap, 0);
        mask_ = cap - 1;
        for (uint32_t i = 0; i < rows_.size(); ++i) {
            size_t p = TupleHash{}(rows_[i]) & mask_;
            while (buckets_[p]) p = (p + 1) & mask_;
            buckets_[p] = i + 1;
        }
    }

    std::string name_;
    size_t arity_;
    Rows rows_;
    std::vector<uint32_t> buckets_; // row index + 1; 0 marks an empty slot
    size_t mask_ = 0;
};

using RelationPtr = std::shared_ptr<const Relation>;

/// Open-Next-Close cursor over a relation snapshot. next() returns nullptr
/// as the end marker and keeps doing so; close() is idempotent.
class TableIterator {
public:
    struct Handle {
        Relation::Rows::const_iterator it;
        bool open = false;
    };

    explicit TableIterator(RelationPtr rel) : rel_(std::move(rel)) {}

    Handle open() const { return Handle{rel_->begin(), true}; }

    const Tuple* next(Handle& h) const {
        if (!h.open || h.it == rel_->end()) return nullptr;
        const Tuple* t = &*h.it;
        ++h.it;
        return t;
    }

    void close(Handle& h) const { h.open = false; }

private:
    RelationPtr rel_;
};

inline TableIterator as_iterator(RelationPtr rel) { return TableIterator(std::move(rel)); }

struct StringHash {
    using is_transparent = void;
    size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
};

/// Map of relation name -> immutable relation. Copies share relations.
class Database {
public:
    using Map = std::unordered_map<std::string, RelationPtr, StringHash, std::equal_to<>>;

    void put(Relation&& rel) {
        auto p = std::make_shared<const Relation>(std::move(rel));
        rels_[p->name()] = std::move(p);
    }
    void put(RelationPtr rel) { rels_[rel->name()] = std::move(rel); }

    const Relation* find(std::string_view name) const {
        auto it = rels_.find(name);
        return it == rels_.end() ? nullptr : it->second.get();
    }
    RelationPtr find_shared(std::string_view name) const {
        auto it = rels_.find(name);
        return it == rels_.end() ? nullptr : it->second;
    }
    bool has(std::string_view name) const { return rels_.find(name) != rels_.end(); }
    void erase(std::string_view name) {
        auto it = rels_.find(name);
        if (it != rels_.end()) rels_.erase(it);
    }

    size_t size() const { return rels_.size(); }
    bool empty() const { return rels_.empty(); }
    Map::const_iterator begin() const { return rels_.begin(); }
    Map::const_iterator end() const { return rels_.end(); }

    size_t total_tuples() const {
        size_t n = 0;
        for (const auto& [_, r] : rels_) n += r->size();
        return n;
    }

    /// Per-relation set union; arity conflicts raise SchemaMismatch.
    void merge_union(const Database& other) {
        for (const auto& [name, rel] : other.rels_) {
            const Relation* mine = find(name);
            if (!mine) {
                rels_[name] = rel;
                continue;
            }
            if (mine->arity() != rel->arity())
                throw SchemaMismatch("relation " + name + ": arity " + std::to_string(mine->arity()) +
                                     " vs " + std::to_string(rel->arity()));
            Relation merged(name, mine->arity());
            for (const auto& t : *mine) merged.insert(t);
            for (const auto& t : *rel) merged.insert(t);
            put(std::move(merged));
        }
    }

private:
    Map rels_;
};

} // namespace tipflow::datalog
