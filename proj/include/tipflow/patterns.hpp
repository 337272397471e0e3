#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tipflow/eval.hpp"
#include "tipflow/message.hpp"

namespace tipflow {

/// Content-level condition: a Datalog program plus the relation whose
/// non-emptiness carries the decision.
struct RoutingCondition {
    datalog::ProgramPtr program;
    std::string goal;
};

/// Condition index -> leaving channel, first match wins; messages matching
/// nothing leave on the default channel.
struct ChannelTable {
    std::vector<std::string> channels;
    std::string default_channel;
};

struct PatternOptions {
    datalog::EvalOptions eval;
    /// Stop condition evaluation at the first derived goal tuple. The
    /// boolean outcome is unchanged; off by default (full fixpoint, the
    /// measured reference mode).
    bool exists_mode = false;
};

/// Truth judgement -> Boolean: true iff the relation holds at least one fact.
bool bool_rc(const Relation* rel);
inline bool bool_rc(const Relation& rel) { return !rel.empty(); }

/// Evaluate a condition over a message body (optionally with the header
/// relations visible) and return the goal relation, or null when nothing
/// was derived.
RelationPtr evaluate_condition(const Message& msg, const RoutingCondition& cond,
                               const PatternOptions& opts = {}, bool include_header = false);

// --- routing patterns ---

std::pair<std::string, Message> content_based_router(const Message& msg,
                                                     const std::vector<RoutingCondition>& conds,
                                                     const ChannelTable& channels,
                                                     const PatternOptions& opts = {});

std::optional<Message> message_filter(const Message& msg, const RoutingCondition& cond,
                                      const PatternOptions& opts = {});

std::vector<std::pair<std::string, Message>> multicast(const Message& msg,
                                                       const std::vector<std::string>& channels);

struct RecipientListResult {
    std::vector<std::pair<std::string, Message>> deliveries;
    size_t unresolved = 0;
};
/// Derives receiver keys via a unary goal relation and resolves them in the
/// registry; keys without an entry are counted. Throws NoRecipientResolved
/// when nothing resolves.
RecipientListResult recipient_list(const Message& msg, const RoutingCondition& rd,
                                   const std::map<std::string, std::string>& registry,
                                   const PatternOptions& opts = {});

struct SplitCondition {
    RoutingCondition cond;
    /// Relation name the derived facts are wrapped under; defaults to the
    /// goal name when empty.
    std::string output_relation;
};
/// One leaving message per condition with a non-empty derivation; header
/// and attachments are copied onto every part, ids get a -<index> suffix.
std::vector<Message> splitter(const Message& msg, const std::vector<SplitCondition>& conds,
                              const PatternOptions& opts = {});

/// Helper building one split condition per record identifier of a bulk
/// message over the given body relation.
std::vector<SplitCondition> record_split_conditions(const Message& msg, std::string_view relation);

// --- aggregator ---

struct AggregateCollection {
    Tuple key;
    std::vector<Message> messages;
    std::chrono::steady_clock::time_point created_at;
};
using AggregateStore = std::map<Tuple, AggregateCollection, datalog::TupleLess>;

/// Appends msg to the collection under the key derived by crc (header and
/// body are both visible to the correlation program). The goal must derive
/// exactly one tuple.
Tuple aggregator_correlate(const Message& msg, const RoutingCondition& crc, AggregateStore& store,
                           const PatternOptions& opts = {});

bool aggregator_complete(const Message& msg, const RoutingCondition& cpc,
                         const PatternOptions& opts = {});

/// Union of the collected bodies; id of the first member suffixed "-agg",
/// header and attachments of the first member retained.
Message aggregator_strategy(const AggregateCollection& coll);

struct AggregatorConfig {
    RoutingCondition correlation;
    std::optional<RoutingCondition> completion;
    std::optional<size_t> max_count;
    std::optional<std::chrono::milliseconds> timeout;
    size_t partitions = 16;
};

/// Stateful aggregator with a hash-partitioned collection store; each
/// partition is guarded independently so concurrent offers on different
/// keys do not contend. Completion precedence: condition, then max_count;
/// timeouts are applied by sweep()/drain().
class Aggregator {
public:
    explicit Aggregator(AggregatorConfig config);
    Aggregator(Aggregator&&) noexcept;
    ~Aggregator();

    std::optional<Message> offer(const Message& msg, const PatternOptions& opts = {});
    std::vector<Message> sweep(std::chrono::steady_clock::time_point now);
    std::vector<Message> drain();

private:
    struct Partition;
    AggregatorConfig config_;
    std::vector<std::unique_ptr<Partition>> partitions_;
};

// --- transformation patterns ---

/// Body := evaluated goal relation; relations referenced by the program's
/// rule bodies are consumed, untouched relations pass through. Header,
/// attachments and message id are preserved (1:1, no new message).
Message message_translator(const Message& msg, const datalog::Program& mt,
                           const std::string& goal_relation, const PatternOptions& opts = {});

Message content_filter(const Message& msg, const datalog::Program& program,
                       const std::string& goal_relation, const PatternOptions& opts = {});

/// Body := per-relation union of body, data and everything derived by ep
/// (ep may be null for a pure data merge).
Message content_enricher(const Message& msg, const Database& data,
                         const datalog::Program* ep, const PatternOptions& opts = {});

// --- multi-record mode ---

/// Partition semantics for multi-record messages: each record leaves on
/// the channel of the first condition it satisfies, records matching
/// nothing leave on the default channel; one bulk message per channel.
/// Per-record outcomes equal single-record routing for any bulk size.
std::vector<std::pair<std::string, Message>> route_bulk(const Message& msg,
                                                        const std::vector<RoutingCondition>& conds,
                                                        const ChannelTable& channels,
                                                        const PatternOptions& opts = {});

} // namespace tipflow
