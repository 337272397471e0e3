#include "tipflow/patterns.hpp"

#include <algorithm>
#include <mutex>
#include <set>
#include <sstream>

#include "tipflow/errors.hpp"
#include "tipflow/parser.hpp"

namespace tipflow {

using datalog::EvalOptions;
using datalog::Program;
using datalog::evaluate;

bool bool_rc(const Relation* rel) { return rel && !rel->empty(); }

namespace {

EvalOptions eval_opts_for(const RoutingCondition& cond, const PatternOptions& opts) {
    EvalOptions eo = opts.eval;
    if (opts.exists_mode) eo.exists_goal = cond.goal;
    return eo;
}

Database with_header(const Message& msg) {
    Database db = msg.body;
    for (const auto& [name, rel] : msg.header)
        if (!db.has(name)) db.put(rel);
    return db;
}

} // namespace

RelationPtr evaluate_condition(const Message& msg, const RoutingCondition& cond,
                               const PatternOptions& opts, bool include_header) {
    const Database& base = msg.body;
    Database out = include_header ? evaluate(*cond.program, with_header(msg), eval_opts_for(cond, opts))
                                  : evaluate(*cond.program, base, eval_opts_for(cond, opts));
    return out.find_shared(cond.goal);
}

std::pair<std::string, Message> content_based_router(const Message& msg,
                                                     const std::vector<RoutingCondition>& conds,
                                                     const ChannelTable& channels,
                                                     const PatternOptions& opts) {
    for (size_t i = 0; i < conds.size(); ++i) {
        RelationPtr goal = evaluate_condition(msg, conds[i], opts);
        if (bool_rc(goal.get())) {
            const std::string& ch = i < channels.channels.size() ? channels.channels[i]
                                                                 : channels.default_channel;
            return {ch, msg};
        }
    }
    return {channels.default_channel, msg};
}

std::optional<Message> message_filter(const Message& msg, const RoutingCondition& cond,
                                      const PatternOptions& opts) {
    if (bool_rc(evaluate_condition(msg, cond, opts).get())) return msg;
    return std::nullopt;
}

std::vector<std::pair<std::string, Message>> multicast(const Message& msg,
                                                       const std::vector<std::string>& channels) {
    std::vector<std::pair<std::string, Message>> out;
    out.reserve(channels.size());
    for (const std::string& ch : channels) out.emplace_back(ch, msg);
    return out;
}

RecipientListResult recipient_list(const Message& msg, const RoutingCondition& rd,
                                   const std::map<std::string, std::string>& registry,
                                   const PatternOptions& opts) {
    auto arity_it = rd.program->arities.find(rd.goal);
    if (arity_it == rd.program->arities.end() || arity_it->second != 1)
        throw ConfigError("recipient list goal '" + rd.goal + "' must be a unary relation");
    RelationPtr keys = evaluate_condition(msg, rd, opts);
    RecipientListResult result;
    std::set<std::string> ordered;
    if (keys)
        for (const Tuple& t : *keys) ordered.insert(t[0].to_text());
    for (const std::string& key : ordered) {
        auto it = registry.find(key);
        if (it == registry.end()) {
            ++result.unresolved;
            continue;
        }
        result.deliveries.emplace_back(it->second, msg);
    }
    if (result.deliveries.empty())
        throw NoRecipientResolved("message " + msg.id + ": no receiver configuration resolved");
    return result;
}

std::vector<Message> splitter(const Message& msg, const std::vector<SplitCondition>& conds,
                              const PatternOptions& opts) {
    std::vector<Message> out;
    for (size_t i = 0; i < conds.size(); ++i) {
        RelationPtr derived = evaluate_condition(msg, conds[i].cond, opts);
        if (!bool_rc(derived.get())) continue;
        Message part;
        part.id = msg.id + "-" + std::to_string(i);
        part.header = msg.header;
        part.attachments = msg.attachments;
        part.support_rules = msg.support_rules;
        const std::string& name =
            conds[i].output_relation.empty() ? conds[i].cond.goal : conds[i].output_relation;
        Relation rel(name, derived->arity());
        for (const Tuple& t : *derived) rel.insert(t);
        part.body.put(std::move(rel));
        out.push_back(std::move(part));
    }
    return out;
}

std::vector<SplitCondition> record_split_conditions(const Message& msg, std::string_view relation) {
    const Relation* rel = msg.body.find(relation);
    if (!rel) return {};
    size_t arity = rel->arity();
    std::vector<SplitCondition> out;
    for (const std::string& id : record_ids(msg)) {
        std::ostringstream rule;
        rule << "part(";
        for (size_t i = 0; i < arity; ++i) rule << (i ? "," : "") << "v" << i;
        rule << ") :- " << relation << "(";
        for (size_t i = 0; i < arity; ++i) rule << (i ? "," : "") << "v" << i;
        rule << "), equals(v0," << Constant(id).to_literal() << ").";
        SplitCondition sc;
        sc.cond = RoutingCondition{datalog::parse_program_shared(rule.str()), "part"};
        sc.output_relation = std::string(relation);
        out.push_back(std::move(sc));
    }
    return out;
}

// --- aggregator ---

namespace {

Tuple derive_correlation_key(const Message& msg, const RoutingCondition& crc,
                             const PatternOptions& opts) {
    RelationPtr goal = evaluate_condition(msg, crc, opts, /*include_header=*/true);
    if (!goal || goal->size() != 1)
        throw AmbiguousCorrelation("message " + msg.id + ": correlation derived " +
                                   std::to_string(goal ? goal->size() : 0) + " keys, expected 1");
    return *goal->begin();
}

} // namespace

Tuple aggregator_correlate(const Message& msg, const RoutingCondition& crc, AggregateStore& store,
                           const PatternOptions& opts) {
    Tuple key = derive_correlation_key(msg, crc, opts);
    auto it = store.find(key);
    if (it == store.end())
        it = store.emplace(key, AggregateCollection{key, {}, std::chrono::steady_clock::now()}).first;
    it->second.messages.push_back(msg);
    return key;
}

bool aggregator_complete(const Message& msg, const RoutingCondition& cpc,
                         const PatternOptions& opts) {
    return bool_rc(evaluate_condition(msg, cpc, opts, /*include_header=*/true).get());
}

Message aggregator_strategy(const AggregateCollection& coll) {
    const Message& first = coll.messages.front();
    Message out;
    out.id = first.id + "-agg";
    out.header = first.header;
    out.attachments = first.attachments;
    out.support_rules = first.support_rules;
    Database body;
    for (const Message& m : coll.messages) body.merge_union(m.body);
    out.body = std::move(body);
    return out;
}

struct Aggregator::Partition {
    std::mutex mutex;
    AggregateStore store;
};

Aggregator::Aggregator(Aggregator&&) noexcept = default;
Aggregator::~Aggregator() = default;

Aggregator::Aggregator(AggregatorConfig config) : config_(std::move(config)) {
    size_t n = std::max<size_t>(1, config_.partitions);
    partitions_.reserve(n);
    for (size_t i = 0; i < n; ++i) partitions_.push_back(std::make_unique<Partition>());
}

std::optional<Message> Aggregator::offer(const Message& msg, const PatternOptions& opts) {
    Tuple key = derive_correlation_key(msg, config_.correlation, opts);
    Partition& part = *partitions_[datalog::TupleHash{}(key) % partitions_.size()];
    std::lock_guard<std::mutex> lock(part.mutex);
    auto it = part.store.find(key);
    if (it == part.store.end())
        it = part.store.emplace(key, AggregateCollection{key, {}, std::chrono::steady_clock::now()})
                 .first;
    it->second.messages.push_back(msg);

    bool complete = false;
    if (config_.completion && aggregator_complete(msg, *config_.completion, opts)) complete = true;
    else if (config_.max_count && it->second.messages.size() >= *config_.max_count) complete = true;
    if (!complete) return std::nullopt;
    Message out = aggregator_strategy(it->second);
    part.store.erase(it);
    return out;
}

std::vector<Message> Aggregator::sweep(std::chrono::steady_clock::time_point now) {
    std::vector<Message> out;
    if (!config_.timeout) return out;
    for (auto& part : partitions_) {
        std::lock_guard<std::mutex> lock(part->mutex);
        for (auto it = part->store.begin(); it != part->store.end();) {
            if (now - it->second.created_at >= *config_.timeout) {
                out.push_back(aggregator_strategy(it->second));
                it = part->store.erase(it);
            } else {
                ++it;
            }
        }
    }
    return out;
}

std::vector<Message> Aggregator::drain() {
    std::vector<Message> out;
    for (auto& part : partitions_) {
        std::lock_guard<std::mutex> lock(part->mutex);
        for (auto& [_, coll] : part->store) out.push_back(aggregator_strategy(coll));
        part->store.clear();
    }
    return out;
}

// --- transformation patterns ---

namespace {

Message translate_impl(const Message& msg, const Program& program, const std::string& goal,
                       const PatternOptions& opts) {
    auto arity_it = program.arities.find(goal);
    if (arity_it == program.arities.end() || !program.is_intensional(goal))
        throw ConfigError("translation goal '" + goal + "' is not derived by the program");
    EvalOptions eo = opts.eval;
    Database evaluated = evaluate(program, msg.body, eo);
    auto consumed = program.body_relations();

    Message out;
    out.id = msg.id;
    out.header = msg.header;
    out.attachments = msg.attachments;
    out.support_rules = msg.support_rules;
    RelationPtr goal_rel = evaluated.find_shared(goal);
    if (!goal_rel) goal_rel = std::make_shared<const Relation>(goal, arity_it->second);
    out.body.put(std::move(goal_rel));
    for (const auto& [name, rel] : msg.body) {
        if (name == goal || consumed.count(name)) continue;
        out.body.put(rel);
    }
    return out;
}

} // namespace

Message message_translator(const Message& msg, const Program& mt, const std::string& goal_relation,
                           const PatternOptions& opts) {
    return translate_impl(msg, mt, goal_relation, opts);
}

Message content_filter(const Message& msg, const Program& program, const std::string& goal_relation,
                       const PatternOptions& opts) {
    return translate_impl(msg, program, goal_relation, opts);
}

Message content_enricher(const Message& msg, const Database& data, const Program* ep,
                         const PatternOptions& opts) {
    Database merged = msg.body;
    merged.merge_union(data);
    Message out;
    out.id = msg.id;
    out.header = msg.header;
    out.attachments = msg.attachments;
    out.support_rules = msg.support_rules;
    out.body = ep ? evaluate(*ep, merged, opts.eval) : std::move(merged);
    return out;
}

// --- multi-record mode ---

std::vector<std::pair<std::string, Message>> route_bulk(const Message& msg,
                                                        const std::vector<RoutingCondition>& conds,
                                                        const ChannelTable& channels,
                                                        const PatternOptions& opts) {
    std::vector<std::string> ids = record_ids(msg);
    std::map<std::string, size_t> assignment; // id -> condition index
    size_t unassigned = ids.size();

    // restriction of the body to one record id, built lazily for
    // conditions that join across relations
    std::map<std::string, Database> restricted;
    auto build_restricted = [&] {
        if (!restricted.empty()) return;
        std::map<std::string, std::map<std::string, Relation>> per_id;
        for (const auto& [name, rel] : msg.body) {
            for (const Tuple& t : *rel) {
                if (t.empty() || !t[0].is_str()) continue;
                auto& rels = per_id[t[0].str()];
                auto it = rels.find(name);
                if (it == rels.end()) it = rels.emplace(name, Relation(name, rel->arity())).first;
                it->second.insert(t);
            }
        }
        for (auto& [id, rels] : per_id) {
            Database db;
            for (auto& [_, rel] : rels) db.put(std::move(rel));
            restricted.emplace(id, std::move(db));
        }
    };

    for (size_t i = 0; i < conds.size() && unassigned > 0; ++i) {
        if (conds[i].program->record_local(conds[i].goal)) {
            // one pass over the whole bulk body; the goal's first column is
            // the record id
            RelationPtr goal = evaluate_condition(msg, conds[i], opts);
            if (!goal) continue;
            for (const Tuple& t : *goal) {
                if (t.empty() || !t[0].is_str()) continue;
                auto [it, fresh] = assignment.emplace(t[0].str(), i);
                if (fresh) --unassigned;
            }
        } else {
            build_restricted();
            for (const std::string& id : ids) {
                if (assignment.count(id)) continue;
                auto rit = restricted.find(id);
                if (rit == restricted.end()) continue;
                Message probe;
                probe.id = id;
                probe.body = rit->second;
                if (bool_rc(evaluate_condition(probe, conds[i], opts).get())) {
                    assignment.emplace(id, i);
                    --unassigned;
                }
            }
        }
    }

    // bucket per distinct channel, in channel-table order
    std::vector<std::string> bucket_channel;
    std::unordered_map<std::string, uint32_t> bucket_of;
    auto bucket_index = [&](const std::string& ch) {
        auto [it, fresh] = bucket_of.emplace(ch, static_cast<uint32_t>(bucket_channel.size()));
        if (fresh) bucket_channel.push_back(ch);
        return it->second;
    };
    for (const std::string& ch : channels.channels) bucket_index(ch);
    uint32_t default_bucket = bucket_index(channels.default_channel);

    std::unordered_map<std::string, uint32_t> record_bucket;
    record_bucket.reserve(ids.size());
    std::vector<std::vector<std::string>> members(bucket_channel.size());
    for (const std::string& id : ids) {
        auto it = assignment.find(id);
        uint32_t b = it == assignment.end() || it->second >= channels.channels.size()
                         ? default_bucket
                         : bucket_of.at(channels.channels[it->second]);
        record_bucket.emplace(id, b);
        members[b].push_back(id);
    }

    // one scan over the body: each tuple lands in its record's bucket
    std::vector<std::map<std::string, Relation>> bodies(bucket_channel.size());
    for (const auto& [name, rel] : msg.body) {
        for (const Tuple& t : *rel) {
            if (t.empty() || !t[0].is_str()) continue;
            auto it = record_bucket.find(t[0].str());
            if (it == record_bucket.end()) continue;
            auto& rels = bodies[it->second];
            auto rit = rels.find(name);
            if (rit == rels.end()) rit = rels.emplace(name, Relation(name, rel->arity())).first;
            rit->second.insert(t);
        }
    }

    std::vector<std::pair<std::string, Message>> out;
    for (uint32_t b = 0; b < bucket_channel.size(); ++b) {
        if (members[b].empty()) continue;
        Message part;
        part.id = msg.id + "@" + bucket_channel[b];
        part.attachments = msg.attachments;
        part.support_rules = msg.support_rules;
        for (auto& [_, rel] : bodies[b]) part.body.put(std::move(rel));
        Relation seq(std::string(kBulkSeqRelation), 2);
        for (size_t i = 0; i < members[b].size(); ++i)
            seq.insert({Constant(static_cast<int64_t>(i)), Constant(members[b][i])});
        part.header = msg.header;
        part.header.put(std::move(seq));
        out.emplace_back(bucket_channel[b], std::move(part));
    }
    return out;
}

} // namespace tipflow
