#include "tipflow/json_io.hpp"

#include <algorithm>
#include <istream>

#include "tipflow/errors.hpp"

namespace tipflow {

namespace {

Constant field_to_constant(const nlohmann::json& rec, const std::string& name, FieldType type) {
    auto it = rec.find(name);
    if (it == rec.end()) throw MissingField(name);
    const nlohmann::json& v = *it;
    switch (type) {
        case FieldType::Str:
            if (!v.is_string()) throw TypeMismatch(name, "expected string");
            return Constant(v.get<std::string>());
        case FieldType::Int:
            if (!v.is_number_integer() && !v.is_number_unsigned())
                throw TypeMismatch(name, "expected integer");
            return Constant(v.get<int64_t>());
        default:
            if (!v.is_number()) throw TypeMismatch(name, "expected number");
            return Constant(v.get<double>());
    }
}

Tuple record_to_tuple(const nlohmann::json& rec, const Schema& schema,
                      const std::string* forced_id) {
    Tuple t;
    t.reserve(schema.fields.size());
    for (size_t i = 0; i < schema.fields.size(); ++i) {
        if (i == 0 && forced_id) {
            t.push_back(Constant(*forced_id));
            continue;
        }
        t.push_back(field_to_constant(rec, schema.fields[i], schema.types[i]));
    }
    return t;
}

const Schema& schema_for(const nlohmann::json& rec, const SchemaRegistry& schemas) {
    auto it = rec.find("objecttype");
    if (it == rec.end() || !it->is_string()) throw MissingField("objecttype");
    const Schema* s = schemas.find(it->get<std::string>());
    if (!s) throw TypeMismatch("objecttype", "no schema for " + it->get<std::string>());
    return *s;
}

nlohmann::ordered_json tuple_to_record(const Tuple& fact, const Schema& schema) {
    nlohmann::ordered_json rec = nlohmann::ordered_json::object();
    for (size_t i = 0; i < schema.fields.size(); ++i) {
        const Constant& c = fact[i];
        switch (schema.types[i]) {
            case FieldType::Str: rec[schema.fields[i]] = c.is_str() ? c.str() : c.to_text(); break;
            case FieldType::Int:
                rec[schema.fields[i]] = c.is_int() ? c.as_int() : static_cast<int64_t>(c.numeric());
                break;
            default: rec[schema.fields[i]] = c.numeric(); break;
        }
    }
    return rec;
}

} // namespace

Message record_to_message(const nlohmann::json& record, const Schema& schema) {
    Tuple fact = record_to_tuple(record, schema, nullptr);
    if (!fact[0].is_str()) throw TypeMismatch(schema.fields[0], "record identifier must be a string");
    Message msg;
    msg.id = fact[0].str();
    Relation rel(schema.relation, schema.fields.size());
    rel.insert(std::move(fact));
    msg.body.put(std::move(rel));
    add_meta(msg, schema.relation);
    return msg;
}

Message multiformat_to_message(const nlohmann::json& primary,
                               const nlohmann::json& context_records,
                               const SchemaRegistry& schemas) {
    Message msg = record_to_message(primary, schema_for(primary, schemas));
    std::map<std::string, Relation> extra;
    for (const auto& rec : context_records) {
        const Schema& s = schema_for(rec, schemas);
        Tuple fact = record_to_tuple(rec, s, &msg.id);
        auto it = extra.find(s.relation);
        if (it == extra.end())
            it = extra.emplace(s.relation, Relation(s.relation, s.fields.size())).first;
        it->second.insert(std::move(fact));
    }
    for (auto& [_, rel] : extra) msg.body.put(std::move(rel));
    return msg;
}

nlohmann::json message_to_record(const Message& msg, const SchemaRegistry& schemas) {
    // the meta header names the primary relation
    std::string primary_rel;
    if (const Relation* meta = msg.header.find(kMetaRelation)) {
        for (const Tuple& t : *meta)
            if (t[0] == Constant(msg.id)) { primary_rel = t[1].str(); break; }
    }
    if (primary_rel.empty()) throw SchemaMismatch("message " + msg.id + ": no meta header");
    const Schema* ps = schemas.find(primary_rel);
    if (!ps) throw SchemaMismatch("no schema for relation " + primary_rel);
    const Relation* prim = msg.body.find(primary_rel);
    if (!prim || prim->empty()) throw SchemaMismatch("message " + msg.id + ": empty primary relation");

    nlohmann::ordered_json rec;
    Constant idc(msg.id);
    for (const Tuple& t : *prim)
        if (t[0] == idc) { rec = tuple_to_record(t, *ps); break; }
    if (rec.is_null()) throw SchemaMismatch("message " + msg.id + ": no primary fact");

    nlohmann::ordered_json context = nlohmann::ordered_json::array();
    for (const auto& [name, rel] : msg.body) {
        if (name == primary_rel) continue;
        const Schema* cs = schemas.find(name);
        if (!cs) throw SchemaMismatch("no schema for relation " + name);
        std::vector<Tuple> rows(rel->begin(), rel->end());
        std::sort(rows.begin(), rows.end(), datalog::TupleLess{});
        for (const Tuple& t : rows) context.push_back(tuple_to_record(t, *cs));
    }
    if (!context.empty()) rec["context"] = std::move(context);
    return rec;
}

std::string record_json_line(const Message& msg, const SchemaRegistry& schemas) {
    return message_to_record(msg, schemas).dump();
}

std::optional<std::string> RecordChunker::next() {
    if (format_ == StreamFormat::Ndjson) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            return line;
        }
        return std::nullopt;
    }
    // JsonArray: extract balanced top-level objects; brackets and commas
    // between them are skipped, string literals and escapes respected.
    std::string obj;
    int depth = 0;
    bool in_string = false, escaped = false;
    char c;
    while (in_.get(c)) {
        if (c == '\n') ++line_;
        if (depth == 0) {
            if (c == '{') {
                depth = 1;
                obj.push_back(c);
            }
            continue;
        }
        obj.push_back(c);
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}') {
            if (--depth == 0) return obj;
        }
    }
    return std::nullopt;
}

MessageStream::MessageStream(std::istream& in, const SchemaRegistry& schemas, StreamFormat format)
    : chunker_(in, format), schemas_(schemas) {}

std::optional<Message> MessageStream::next() {
    while (!done_) {
        auto chunk = chunker_.next();
        if (!chunk) {
            done_ = true;
            break;
        }
        try {
            nlohmann::json rec = nlohmann::json::parse(*chunk);
            const Schema& s = schema_for(rec, schemas_);
            auto ctx = rec.find("context");
            if (ctx != rec.end() && ctx->is_array())
                return multiformat_to_message(rec, *ctx, schemas_);
            return record_to_message(rec, s);
        } catch (const std::exception&) {
            ++errors_; // skip the offending record, keep streaming
        }
    }
    return std::nullopt;
}

} // namespace tipflow
