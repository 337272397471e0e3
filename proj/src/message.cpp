#include "tipflow/message.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "tipflow/errors.hpp"

namespace tipflow {

SchemaRegistry SchemaRegistry::builtin() {
    SchemaRegistry reg;
    reg.add(Schema{"order",
                   {"id", "objecttype", "ORDERKEY", "CUSTKEY", "OTOTALPRICE", "OPRIORITY", "SHIPPRIORITY"},
                   {FieldType::Str, FieldType::Str, FieldType::Int, FieldType::Int, FieldType::Float,
                    FieldType::Str, FieldType::Int}});
    reg.add(Schema{"customer",
                   {"id", "objecttype", "CUSTKEY", "NAME", "CNATIONKEY", "PHONE", "ACCTBAL", "MKTSEGMENT"},
                   {FieldType::Str, FieldType::Str, FieldType::Int, FieldType::Str, FieldType::Int,
                    FieldType::Str, FieldType::Float, FieldType::Str}});
    reg.add(Schema{"nation",
                   {"id", "objecttype", "NATIONKEY", "NNAME", "NREGIONKEY", "NCOMMENT"},
                   {FieldType::Str, FieldType::Str, FieldType::Int, FieldType::Str, FieldType::Int,
                    FieldType::Str}});
    return reg;
}

SchemaRegistry SchemaRegistry::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schema registry: " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in);
    SchemaRegistry reg = builtin();
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        Schema s;
        s.relation = it.key();
        for (const auto& f : it.value().at("fields")) {
            s.fields.push_back(f.at(0).get<std::string>());
            std::string ty = f.at(1).get<std::string>();
            if (ty == "string") s.types.push_back(FieldType::Str);
            else if (ty == "integer") s.types.push_back(FieldType::Int);
            else if (ty == "float") s.types.push_back(FieldType::Float);
            else throw ConfigError("schema " + s.relation + ": unknown field type " + ty);
        }
        if (s.fields.size() < 2)
            throw ConfigError("schema " + s.relation + ": needs at least id and type fields");
        reg.add(std::move(s));
    }
    return reg;
}

void add_meta(Message& msg, std::string_view relation) {
    Relation meta(std::string(kMetaRelation), 2);
    if (const Relation* prior = msg.header.find(kMetaRelation))
        for (const Tuple& t : *prior) meta.insert(t);
    meta.insert({Constant(msg.id), Constant(std::string(relation))});
    msg.header.put(std::move(meta));
}

std::vector<std::string> record_ids(const Message& msg) {
    const Relation* seq = msg.header.find(kBulkSeqRelation);
    if (!seq) return {msg.id};
    std::vector<std::pair<int64_t, std::string>> order;
    order.reserve(seq->size());
    for (const Tuple& t : *seq) order.emplace_back(t[0].as_int(), t[1].str());
    std::sort(order.begin(), order.end());
    std::vector<std::string> ids;
    ids.reserve(order.size());
    for (auto& [_, id] : order) ids.push_back(std::move(id));
    return ids;
}

size_t record_count(const Message& msg) {
    const Relation* seq = msg.header.find(kBulkSeqRelation);
    return seq ? seq->size() : 1;
}

bool is_bulk(const Message& msg) { return record_count(msg) > 1; }

namespace {

Message assemble_group(const std::vector<Message>& group) {
    Message bulk;
    bulk.id = group[0].id + "-bulk";
    Relation seq(std::string(kBulkSeqRelation), 2);
    std::map<std::string, Relation> body;
    Database header;
    for (size_t i = 0; i < group.size(); ++i) {
        const Message& m = group[i];
        seq.insert({Constant(static_cast<int64_t>(i)), Constant(m.id)});
        for (const auto& [name, rel] : m.body) {
            auto it = body.find(name);
            if (it == body.end())
                it = body.emplace(name, Relation(name, rel->arity())).first;
            else if (it->second.arity() != rel->arity())
                throw SchemaMismatch("bulk_assemble: relation " + name + " arity conflict");
            for (const Tuple& t : *rel) it->second.insert(t);
        }
        header.merge_union(m.header);
        for (const auto& a : m.attachments) bulk.attachments.push_back(a);
    }
    for (auto& [_, rel] : body) bulk.body.put(std::move(rel));
    header.put(std::move(seq));
    bulk.header = std::move(header);
    bulk.support_rules = group[0].support_rules;
    return bulk;
}

} // namespace

std::vector<Message> bulk_assemble(const std::vector<Message>& msgs, size_t k) {
    if (k == 0) throw SchemaMismatch("bulk_assemble: k must be >= 1");
    if (k == 1) return msgs;
    std::vector<Message> out;
    out.reserve((msgs.size() + k - 1) / k);
    std::vector<Message> group;
    for (const Message& m : msgs) {
        group.push_back(m);
        if (group.size() == k) {
            out.push_back(assemble_group(group));
            group.clear();
        }
    }
    if (!group.empty()) out.push_back(assemble_group(group));
    return out;
}

std::vector<Message> bulk_split(const Message& bulk) {
    std::vector<std::string> ids = record_ids(bulk);
    const Relation* meta = bulk.header.find(kMetaRelation);
    std::vector<Message> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) {
        Message part;
        part.id = id;
        Constant idc(id);
        for (const auto& [name, rel] : bulk.body) {
            Relation mine(name, rel->arity());
            for (const Tuple& t : *rel)
                if (!t.empty() && t[0] == idc) mine.insert(t);
            if (!mine.empty()) part.body.put(std::move(mine));
        }
        if (meta) {
            Relation m(std::string(kMetaRelation), 2);
            for (const Tuple& t : *meta)
                if (t[0] == idc) m.insert(t);
            if (!m.empty()) part.header.put(std::move(m));
        }
        part.support_rules = bulk.support_rules;
        out.push_back(std::move(part));
    }
    return out;
}

std::optional<Message> BulkAssembler::push(Message msg) {
    if (k_ <= 1) return msg;
    pending_.push_back(std::move(msg));
    if (pending_.size() < k_) return std::nullopt;
    Message bulk = bulk_assemble(pending_, k_).front();
    pending_.clear();
    return bulk;
}

std::optional<Message> BulkAssembler::flush() {
    if (pending_.empty()) return std::nullopt;
    Message bulk = bulk_assemble(pending_, k_ < 2 ? 1 : k_).front();
    pending_.clear();
    return bulk;
}

} // namespace tipflow
