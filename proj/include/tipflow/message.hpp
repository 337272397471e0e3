#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tipflow/ast.hpp"
#include "tipflow/relation.hpp"

namespace tipflow {

using datalog::Constant;
using datalog::Database;
using datalog::Relation;
using datalog::RelationPtr;
using datalog::Tuple;

enum class FieldType { Str, Int, Float };

/// Positional layout of one record relation. Position 0 is the record
/// identifier, position 1 the record type.
struct Schema {
    std::string relation;
    std::vector<std::string> fields;
    std::vector<FieldType> types;
};

class SchemaRegistry {
public:
    void add(Schema s) { schemas_[s.relation] = std::move(s); }
    const Schema* find(std::string_view relation) const {
        auto it = schemas_.find(std::string(relation));
        return it == schemas_.end() ? nullptr : &it->second;
    }
    size_t size() const { return schemas_.size(); }
    auto begin() const { return schemas_.begin(); }
    auto end() const { return schemas_.end(); }

    /// order / customer / nation layouts used by the generator and the
    /// shipped routing programs.
    static SchemaRegistry builtin();
    /// JSON config {"relation": {"fields": [["name","type"], ...]}, ...},
    /// merged over the builtin registry.
    static SchemaRegistry from_json_file(const std::filesystem::path& path);

private:
    std::map<std::string, Schema> schemas_;
};

/// A message: meta-fact header, fact-collection body, optional support
/// rules and opaque attachments. Immutable by convention once built;
/// copies share relation storage.
struct Message {
    std::string id;
    Database header;
    Database body;
    datalog::ProgramPtr support_rules;
    std::vector<std::string> attachments;
};

inline constexpr std::string_view kMetaRelation = "meta";
inline constexpr std::string_view kBulkSeqRelation = "bulk_seq";

/// header meta(messageId, relationName)
void add_meta(Message& msg, std::string_view relation);

/// Record identifiers in body order for bulk messages (from the bulk_seq
/// header relation); a message without bulk_seq is single-record.
std::vector<std::string> record_ids(const Message& msg);
size_t record_count(const Message& msg);
bool is_bulk(const Message& msg);

/// Pack consecutive runs of k single-record messages into multi-record
/// messages. k=1 returns the input unchanged. All inputs must agree on
/// relation arities (SchemaMismatch otherwise).
std::vector<Message> bulk_assemble(const std::vector<Message>& msgs, size_t k);

/// Inverse of bulk_assemble: split a multi-record message back into one
/// message per record identifier, in bulk_seq order.
std::vector<Message> bulk_split(const Message& bulk);

/// Streaming counterpart of bulk_assemble.
class BulkAssembler {
public:
    explicit BulkAssembler(size_t k) : k_(k) {}
    std::optional<Message> push(Message msg);
    std::optional<Message> flush();

private:
    size_t k_;
    std::vector<Message> pending_;
};

} // namespace tipflow
