#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "tipflow/message.hpp"

namespace tipflow {

enum class StreamFormat { Ndjson, JsonArray };

/// One flat record object -> single-record message. The record must carry
/// every schema field with a convertible value; non-schema fields (padding,
/// context) are ignored here.
Message record_to_message(const nlohmann::json& record, const Schema& schema);

/// Primary record plus context records (matched to schemas by their
/// objecttype), all sharing the primary's message id in fact position 0.
Message multiformat_to_message(const nlohmann::json& primary,
                               const nlohmann::json& context_records,
                               const SchemaRegistry& schemas);

/// Inverse of record_to_message / multiformat_to_message for single-record
/// messages; context facts are rendered back into a "context" array.
nlohmann::json message_to_record(const Message& msg, const SchemaRegistry& schemas);

std::string record_json_line(const Message& msg, const SchemaRegistry& schemas);

/// Pulls record texts off a stream one at a time: NDJSON lines, or the
/// balanced top-level {...} objects of a single JSON array.
class RecordChunker {
public:
    RecordChunker(std::istream& in, StreamFormat format) : in_(in), format_(format) {}
    std::optional<std::string> next();
    size_t line_number() const { return line_; }

private:
    std::istream& in_;
    StreamFormat format_;
    size_t line_ = 0;
};

/// Streaming record reader: one message per NDJSON line (or per element of
/// a single top-level JSON array), constant memory in the stream length.
/// Malformed records are counted and skipped.
class MessageStream {
public:
    MessageStream(std::istream& in, const SchemaRegistry& schemas,
                  StreamFormat format = StreamFormat::Ndjson);

    std::optional<Message> next();

    size_t error_count() const { return errors_; }
    size_t line_number() const { return chunker_.line_number(); }

private:
    RecordChunker chunker_;
    SchemaRegistry schemas_; // own copy: registries are small, streams are not
    size_t errors_ = 0;
    bool done_ = false;
};

} // namespace tipflow
