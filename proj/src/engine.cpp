#include "tipflow/engine.hpp"

#include <chrono>
#include <cstdlib>
#include <condition_variable>
#include <deque>
#include <future>
#include <mutex>
#include <thread>

#include "tipflow/baseline.hpp"
#include "tipflow/errors.hpp"

namespace tipflow {

using Clock = std::chrono::steady_clock;

FileMessageSource::FileMessageSource(const std::filesystem::path& path,
                                     const SchemaRegistry& schemas, StreamFormat format)
    : in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open message file: " + path.string());
    stream_ = std::make_unique<MessageStream>(in_, schemas, format);
}

std::optional<Message> FileMessageSource::next() { return stream_->next(); }
size_t FileMessageSource::skipped() const { return stream_->error_count(); }

GeneratorMessageSource::GeneratorMessageSource(const GenSpec& spec, const SchemaRegistry& schemas)
    : spec_(spec), schemas_(schemas) {
    if (spec.kind == GenKind::Orders)
        orders_ = std::make_unique<OrderGenerator>(spec.seed, spec.target_record_bytes);
    else
        customers_ = std::make_unique<CustomerNationGenerator>(spec.seed);
}

std::optional<Message> GeneratorMessageSource::next() {
    if (produced_ >= spec_.count) return std::nullopt;
    ++produced_;
    std::string line = orders_ ? orders_->next_line() : customers_->next_line();
    nlohmann::json rec = nlohmann::json::parse(line);
    if (customers_) return multiformat_to_message(rec, rec.at("context"), schemas_);
    return record_to_message(rec, *schemas_.find("order"));
}

std::optional<Message> BulkingSource::next() {
    if (!drained_) {
        while (auto m = inner_.next())
            if (auto bulk = assembler_.push(std::move(*m))) return bulk;
        drained_ = true;
    }
    return assembler_.flush();
}

namespace {

struct FileSinkState {
    std::mutex mutex;
    std::ofstream out;
};

/// Shared per-run state: node configs resolved once, counters sharded per
/// worker thread, aggregator instances per aggregator node. process() is
/// safe to call from several workers at once.
class Runner {
public:
    using EmitOverride = std::function<void(const std::string&, const Message&)>;

    /// Per-thread slice of the run statistics; workers write their own
    /// shard so hot counters never bounce between cores.
    struct Shard {
        std::map<std::string, std::pair<uint64_t, uint64_t>> channels; // messages, records
        uint64_t filtered = 0, errors = 0, src_msgs = 0, src_recs = 0;
    };

    class ShardScope {
    public:
        ShardScope(Shard* s) : prev_(tls_shard_) { tls_shard_ = s; }
        ~ShardScope() { tls_shard_ = prev_; }

    private:
        Shard* prev_;
    };

    Runner(const RouteDefinition& route, const RunOptions& opts)
        : route_(route), tap_(opts.record_tap) {
        init_nodes();
        for (const auto& [name, ep] : route.sinks) {
            if (ep.kind == Endpoint::Kind::FileSink) {
                auto fs = std::make_unique<FileSinkState>();
                fs->out.open(ep.path, std::ios::binary);
                if (!fs->out) throw IoError("cannot open sink file: " + ep.path.string());
                file_sinks_[name] = std::move(fs);
            }
        }
    }

    Runner(const RouteDefinition& route, EmitOverride collect)
        : route_(route), collect_(std::move(collect)) {
        init_nodes();
    }

    void feed(const Message& msg) {
        Shard* s = shard();
        s->src_msgs += 1;
        uint64_t recs = record_count(msg);
        s->src_recs += recs;
        try {
            process(msg, 0);
        } catch (const Error&) {
            s->errors += recs;
        }
    }

    void process(const Message& msg, size_t idx) {
        if (idx >= route_.nodes.size()) {
            emit(kOutChannel, msg, idx);
            return;
        }
        const PatternNode& n = route_.nodes[idx];
        PatternOptions popts;
        popts.exists_mode = n.exists_mode;
        switch (n.kind) {
            case NodeKind::Router: {
                const RouterState& rs = routers_.at(idx);
                if (n.mode == RouterMode::Partition) {
                    for (auto& [ch, part] : route_bulk(msg, rs.conds, rs.table, popts))
                        emit(ch, part, idx);
                } else {
                    auto [ch, out] = content_based_router(msg, rs.conds, rs.table, popts);
                    emit(ch, out, idx);
                }
                return;
            }
            case NodeKind::Filter: {
                if (message_filter(msg, RoutingCondition{n.program, n.goal}, popts))
                    process(msg, idx + 1);
                else
                    shard()->filtered += record_count(msg);
                return;
            }
            case NodeKind::Multicast: {
                for (auto& [ch, copy] : multicast(msg, n.channels)) emit(ch, copy, idx);
                return;
            }
            case NodeKind::RecipientList: {
                auto result = recipient_list(msg, RoutingCondition{n.program, n.goal}, n.registry, popts);
                for (auto& [ch, copy] : result.deliveries) emit(ch, copy, idx);
                return;
            }
            case NodeKind::Splitter: {
                std::vector<Message> parts;
                if (!n.split_by_record.empty()) {
                    parts = splitter(msg, record_split_conditions(msg, n.split_by_record), popts);
                } else {
                    parts = splitter(msg, splitters_.at(idx), popts);
                }
                for (Message& part : parts) process(part, idx + 1);
                return;
            }
            case NodeKind::AggregatorNode: {
                if (auto out = aggregators_.at(idx)->offer(msg, popts)) process(*out, idx + 1);
                return;
            }
            case NodeKind::Translator:
                process(message_translator(msg, *n.program, n.goal, popts), idx + 1);
                return;
            case NodeKind::ContentFilter:
                process(content_filter(msg, *n.program, n.goal, popts), idx + 1);
                return;
            case NodeKind::Enricher:
                process(content_enricher(msg, n.enrich_data, n.program.get(), popts), idx + 1);
                return;
            case NodeKind::BaselineRouter: {
                ChannelTable table{{n.channels.front()}, n.default_channel};
                auto [ch, out] = n.variant == "order" ? baseline_router(msg, table)
                                                      : baseline_join_router(msg, table);
                emit(ch, out, idx);
                return;
            }
            case NodeKind::BaselineTranslator:
                process(baseline_translator(msg), idx + 1);
                return;
            case NodeKind::VoidSinkNode:
                emit(n.sink_channel, msg, idx);
                return;
        }
    }

    /// Emit incomplete aggregates at end of run, pushing them through the
    /// rest of the chain.
    void drain_aggregators() {
        for (size_t i = 0; i < route_.nodes.size(); ++i) {
            auto it = aggregators_.find(i);
            if (it == aggregators_.end()) continue;
            for (Message& out : it->second->drain()) {
                try {
                    process(out, i + 1);
                } catch (const Error&) {
                    shard()->errors += record_count(out);
                }
            }
        }
    }

    RunStats finalize(double wall_seconds, size_t skipped, const std::vector<Shard>& shards) {
        RunStats s;
        for (const auto& [name, _] : route_.sinks) {
            s.messages_per_channel[name] = 0;
            s.records_per_channel[name] = 0;
        }
        auto merge = [&](const Shard& sh) {
            for (const auto& [name, counts] : sh.channels) {
                s.messages_per_channel[name] += counts.first;
                s.records_per_channel[name] += counts.second;
            }
            s.filtered_records += sh.filtered;
            s.error_records += sh.errors;
            s.source_messages += sh.src_msgs;
            s.source_records += sh.src_recs;
        };
        for (const auto& sh : shards) merge(sh);
        merge(fallback_);
        s.source_skipped = skipped;
        s.wall_seconds = wall_seconds;
        return s;
    }

private:
    struct RouterState {
        std::vector<RoutingCondition> conds;
        ChannelTable table;
    };

    void init_nodes() {
        for (size_t i = 0; i < route_.nodes.size(); ++i) {
            const PatternNode& n = route_.nodes[i];
            if (n.kind == NodeKind::Router) {
                RouterState rs;
                for (const auto& c : n.conditions) {
                    rs.conds.push_back(RoutingCondition{c.program, c.goal});
                    rs.table.channels.push_back(c.channel);
                }
                rs.table.default_channel =
                    n.default_channel.empty() ? kDeadChannel : n.default_channel;
                routers_.emplace(i, std::move(rs));
            } else if (n.kind == NodeKind::Splitter && n.split_by_record.empty()) {
                std::vector<SplitCondition> conds;
                for (const auto& c : n.conditions)
                    conds.push_back(SplitCondition{RoutingCondition{c.program, c.goal}, c.output_relation});
                splitters_.emplace(i, std::move(conds));
            } else if (n.kind == NodeKind::AggregatorNode) {
                aggregators_.emplace(i, std::make_unique<Aggregator>(*n.aggregator));
            }
        }
    }

    void emit(const std::string& channel, const Message& msg, size_t node_idx) {
        if (collect_) {
            collect_(channel, msg);
            return;
        }
        if (auto target = route_.node_target(channel, node_idx)) {
            process(msg, *target);
            return;
        }
        const std::string& ch = route_.sinks.count(channel) ? channel : kDeadChannel;
        auto& counts = shard()->channels[ch];
        counts.first += 1;
        counts.second += record_count(msg);
        auto fs = file_sinks_.find(ch);
        if (fs != file_sinks_.end()) {
            std::lock_guard<std::mutex> lock(fs->second->mutex);
            for (const Message& part : is_bulk(msg) ? bulk_split(msg) : std::vector<Message>{msg})
                fs->second->out << record_json_line(part, route_.schemas) << '\n';
        }
        if (tap_) {
            std::lock_guard<std::mutex> lock(tap_mutex_);
            for (const std::string& id : record_ids(msg)) tap_(id, channel);
        }
    }

    Shard* shard() {
        if (collect_) return &fallback_; // branch runners keep their stats private
        return tls_shard_ ? tls_shard_ : &fallback_;
    }

    static thread_local Shard* tls_shard_;

    const RouteDefinition& route_;
    std::function<void(const std::string&, const std::string&)> tap_;
    EmitOverride collect_;
    Shard fallback_;
    std::map<std::string, std::unique_ptr<FileSinkState>> file_sinks_;
    std::map<size_t, RouterState> routers_;
    std::map<size_t, std::vector<SplitCondition>> splitters_;
    std::map<size_t, std::unique_ptr<Aggregator>> aggregators_;
    std::mutex tap_mutex_;
};

thread_local Runner::Shard* Runner::tls_shard_ = nullptr;

/// Bounded single-producer single-consumer channel for reader->worker
/// hand-off; the reader blocks when a worker falls behind.
class BoundedQueue {
public:
    explicit BoundedQueue(size_t cap) : cap_(cap) {}

    void push(Message msg) {
        std::unique_lock<std::mutex> lock(mutex_);
        not_full_.wait(lock, [&] { return q_.size() < cap_; });
        q_.push_back(std::move(msg));
        not_empty_.notify_one();
    }

    void close() {
        std::lock_guard<std::mutex> lock(mutex_);
        closed_ = true;
        not_empty_.notify_all();
    }

    std::optional<Message> pop() {
        std::unique_lock<std::mutex> lock(mutex_);
        not_empty_.wait(lock, [&] { return !q_.empty() || closed_; });
        if (q_.empty()) return std::nullopt;
        Message msg = std::move(q_.front());
        q_.pop_front();
        not_full_.notify_one();
        return msg;
    }

private:
    size_t cap_;
    std::mutex mutex_;
    std::condition_variable not_full_, not_empty_;
    std::deque<Message> q_;
    bool closed_ = false;
};

} // namespace

RunStats run(const RouteDefinition& route, MessageSource& source, const RunOptions& opts) {
    Runner runner(route, opts);
    int threads = opts.threads > 0 ? opts.threads : route.worker_threads;
    auto t0 = Clock::now();
    std::vector<Runner::Shard> shards(static_cast<size_t>(std::max(threads, 1)));

    long peak_rss = current_rss_kb();
    uint64_t streamed = 0;
    auto sample_rss = [&] {
        if ((++streamed & 0x1FFF) == 0) peak_rss = std::max(peak_rss, current_rss_kb());
    };

    if (threads <= 1) {
        Runner::ShardScope scope(&shards[0]);
        while (auto msg = source.next()) {
            runner.feed(*msg);
            sample_rss();
        }
    } else {
        size_t cap = std::max<size_t>(16, opts.queue_capacity / static_cast<size_t>(threads));
        std::vector<std::unique_ptr<BoundedQueue>> queues;
        std::vector<std::thread> workers;
        for (int i = 0; i < threads; ++i) {
            queues.push_back(std::make_unique<BoundedQueue>(cap));
            workers.emplace_back([q = queues.back().get(), &runner, shard = &shards[i]] {
                Runner::ShardScope scope(shard);
                while (auto msg = q->pop()) runner.feed(*msg);
            });
        }
        size_t rr = 0;
        while (auto msg = source.next()) {
            queues[rr % queues.size()]->push(std::move(*msg));
            ++rr;
            sample_rss();
        }
        for (auto& q : queues) q->close();
        for (auto& w : workers) w.join();
    }

    runner.drain_aggregators();
    double wall = std::chrono::duration<double>(Clock::now() - t0).count();
    RunStats stats = runner.finalize(wall, source.skipped(), shards);
    stats.peak_rss_kb = std::max(peak_rss, current_rss_kb());
    return stats;
}

RunStats run_preloaded(const RouteDefinition& route, const std::vector<Message>& messages,
                       int threads, std::atomic<uint64_t>* progress, const RunOptions& opts) {
    Runner runner(route, opts);
    std::atomic<size_t> next_idx{0};
    std::vector<Runner::Shard> shards(static_cast<size_t>(std::max(threads, 1)));
    constexpr size_t kClaim = 16; // workers claim blocks, not single messages
    auto work = [&](size_t worker) {
        Runner::ShardScope scope(&shards[worker]);
        uint64_t done = 0;
        while (true) {
            size_t begin = next_idx.fetch_add(kClaim, std::memory_order_relaxed);
            if (begin >= messages.size()) break;
            size_t end = std::min(begin + kClaim, messages.size());
            for (size_t i = begin; i < end; ++i) {
                runner.feed(messages[i]);
                if (progress && ++done == 32) {
                    progress->fetch_add(done, std::memory_order_relaxed);
                    done = 0;
                }
            }
        }
        if (progress && done) progress->fetch_add(done, std::memory_order_relaxed);
    };

    auto t0 = Clock::now();
    if (threads <= 1) {
        work(0);
    } else {
        std::vector<std::thread> workers;
        for (int i = 0; i < threads; ++i) workers.emplace_back(work, static_cast<size_t>(i));
        for (auto& w : workers) w.join();
    }
    runner.drain_aggregators();
    double wall = std::chrono::duration<double>(Clock::now() - t0).count();
    return runner.finalize(wall, 0, shards);
}

long current_rss_kb() {
    std::ifstream status("/proc/self/status");
    std::string line;
    while (std::getline(status, line)) {
        if (line.rfind("VmHWM:", 0) == 0) return std::atol(line.c_str() + 6);
        if (line.rfind("VmRSS:", 0) == 0) return std::atol(line.c_str() + 6);
    }
    return 0;
}

namespace {

/// Run one message through a node sequence, collecting everything that
/// leaves (through channels or off the chain end).
std::vector<Message> run_branch(const Message& msg, const std::vector<PatternNode>& nodes) {
    RouteDefinition branch;
    branch.name = "branch";
    branch.nodes = nodes;
    std::vector<Message> results;
    Runner runner(branch, Runner::EmitOverride([&](const std::string&, const Message& m) {
                      results.push_back(m);
                  }));
    runner.process(msg, 0);
    runner.drain_aggregators();
    return results;
}

} // namespace

Message scatter_gather(const Message& msg, const std::vector<std::vector<PatternNode>>& branches,
                       size_t quorum) {
    if (branches.empty()) throw ConfigError("scatter_gather needs at least one branch");
    if (quorum == 0) quorum = branches.size();
    AggregateCollection coll;
    coll.created_at = std::chrono::steady_clock::now();
    size_t survivors = 0;
    for (const auto& branch : branches) {
        try {
            for (Message& out : run_branch(msg, branch)) coll.messages.push_back(std::move(out));
            ++survivors;
        } catch (const Error&) {
            // missing branch contribution; quorum decides below
        }
    }
    if (survivors < quorum)
        throw Error("scatter_gather: only " + std::to_string(survivors) + " of " +
                    std::to_string(branches.size()) + " branches succeeded, quorum " +
                    std::to_string(quorum));
    if (coll.messages.empty()) throw Error("scatter_gather: no branch produced a message");
    return aggregator_strategy(coll);
}

Message splitter_gather(const Message& msg, const std::vector<SplitCondition>& split_conds,
                        const std::vector<PatternNode>& branch, bool parallel) {
    std::vector<Message> parts = splitter(msg, split_conds);
    if (parts.empty()) throw Error("splitter_gather: split produced no parts");

    std::vector<std::vector<Message>> results(parts.size());
    if (parallel) {
        std::vector<std::future<std::vector<Message>>> futures;
        futures.reserve(parts.size());
        for (const Message& part : parts)
            futures.push_back(std::async(std::launch::async,
                                         [&branch, part] { return run_branch(part, branch); }));
        for (size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
    } else {
        for (size_t i = 0; i < parts.size(); ++i) results[i] = run_branch(parts[i], branch);
    }

    AggregateCollection coll;
    coll.created_at = std::chrono::steady_clock::now();
    for (auto& r : results)
        for (Message& m : r) coll.messages.push_back(std::move(m));
    if (coll.messages.empty()) throw Error("splitter_gather: no part produced a message");
    return aggregator_strategy(coll);
}

} // namespace tipflow
