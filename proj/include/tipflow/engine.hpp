#pragma once

#include <atomic>
#include <fstream>
#include <functional>
#include <memory>

#include "tipflow/route.hpp"

namespace tipflow {

class MessageSource {
public:
    virtual ~MessageSource() = default;
    virtual std::optional<Message> next() = 0;
    /// Records skipped by the stream decoder (malformed input).
    virtual size_t skipped() const { return 0; }
};

class FileMessageSource : public MessageSource {
public:
    FileMessageSource(const std::filesystem::path& path, const SchemaRegistry& schemas,
                      StreamFormat format);
    std::optional<Message> next() override;
    size_t skipped() const override;

private:
    std::ifstream in_;
    std::unique_ptr<MessageStream> stream_;
};

class VectorMessageSource : public MessageSource {
public:
    explicit VectorMessageSource(std::vector<Message> msgs) : msgs_(std::move(msgs)) {}
    std::optional<Message> next() override {
        if (pos_ >= msgs_.size()) return std::nullopt;
        return msgs_[pos_++];
    }

private:
    std::vector<Message> msgs_;
    size_t pos_ = 0;
};

class GeneratorMessageSource : public MessageSource {
public:
    GeneratorMessageSource(const GenSpec& spec, const SchemaRegistry& schemas);
    std::optional<Message> next() override;

private:
    GenSpec spec_;
    SchemaRegistry schemas_;
    std::unique_ptr<OrderGenerator> orders_;
    std::unique_ptr<CustomerNationGenerator> customers_;
    uint64_t produced_ = 0;
};

/// Wraps a source, packing every k consecutive messages into one
/// multi-record message.
class BulkingSource : public MessageSource {
public:
    BulkingSource(MessageSource& inner, size_t k) : inner_(inner), assembler_(k) {}
    std::optional<Message> next() override;
    size_t skipped() const override { return inner_.skipped(); }

private:
    MessageSource& inner_;
    BulkAssembler assembler_;
    bool drained_ = false;
};

struct RunStats {
    std::map<std::string, uint64_t> messages_per_channel;
    std::map<std::string, uint64_t> records_per_channel;
    uint64_t filtered_records = 0;
    uint64_t error_records = 0;
    uint64_t source_messages = 0;
    uint64_t source_records = 0;
    uint64_t source_skipped = 0;
    double wall_seconds = 0;
    long peak_rss_kb = 0; // sampled during streaming runs

    uint64_t routed_records() const {
        uint64_t n = 0;
        for (const auto& [_, c] : records_per_channel) n += c;
        return n;
    }
    /// routed + filtered + errored == input, the per-run conservation law.
    bool conserved() const {
        return routed_records() + filtered_records + error_records == source_records;
    }
};

struct RunOptions {
    int threads = 0; // 0: use route.worker_threads
    size_t queue_capacity = 1024;
    /// Invoked per (record id, channel) at every sink; used by verify mode
    /// and the bulk-consistency checks.
    std::function<void(const std::string& record_id, const std::string& channel)> record_tap;
};

/// Stream a source through the route: one reader, round-robin dispatch to
/// worker route instances over bounded queues.
RunStats run(const RouteDefinition& route, MessageSource& source, const RunOptions& opts = {});

/// Bench mode: messages are already materialized (conversion is measured
/// separately); workers pull via a shared index. `progress` is incremented
/// once per input message as it completes, for throughput sampling.
RunStats run_preloaded(const RouteDefinition& route, const std::vector<Message>& messages,
                       int threads, std::atomic<uint64_t>* progress = nullptr,
                       const RunOptions& opts = {});

/// Current resident set size of this process in kB (0 when unavailable).
long current_rss_kb();

/// Copy the message into every branch, evaluate the branch node sequences
/// independently, and union the surviving results into one message.
/// quorum = 0 requires every branch to succeed.
Message scatter_gather(const Message& msg, const std::vector<std::vector<PatternNode>>& branches,
                       size_t quorum = 0);

/// Split, push every part through the same branch sequence (optionally in
/// parallel), gather the results by union.
Message splitter_gather(const Message& msg, const std::vector<SplitCondition>& split_conds,
                        const std::vector<PatternNode>& branch, bool parallel = false);

} // namespace tipflow
