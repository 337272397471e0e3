#include "tipflow/route.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tipflow/errors.hpp"
#include "tipflow/parser.hpp"

namespace tipflow {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

StreamFormat parse_format(const std::string& s) {
    if (s == "ndjson") return StreamFormat::Ndjson;
    if (s == "json" || s == "jsonArray") return StreamFormat::JsonArray;
    throw ConfigError("unknown format: " + s);
}

Endpoint parse_endpoint(const json& j, const std::filesystem::path& base, bool is_source) {
    Endpoint e;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "file") {
        e.kind = is_source ? Endpoint::Kind::FileSource : Endpoint::Kind::FileSink;
        if (j.contains("path")) e.path = resolve(base, j.at("path").get<std::string>());
        if (j.contains("format")) e.format = parse_format(j.at("format").get<std::string>());
        if (j.contains("schema")) e.schema = j.at("schema").get<std::string>();
    } else if (kind == "generator" && is_source) {
        e.kind = Endpoint::Kind::GeneratorSource;
        GenSpec g;
        std::string gk = j.at("generate").get<std::string>();
        if (gk == "orders") g.kind = GenKind::Orders;
        else if (gk == "customer-nation") g.kind = GenKind::CustomerNation;
        else throw ConfigError("unknown generator kind: " + gk);
        g.count = j.at("count").get<uint64_t>();
        if (j.contains("seed")) g.seed = j.at("seed").get<uint64_t>();
        e.gen = g;
    } else if (kind == "void") {
        e.kind = Endpoint::Kind::VoidSink;
    } else if (kind == "counting") {
        e.kind = Endpoint::Kind::CountingSink;
    } else {
        throw ConfigError("unknown endpoint kind: " + kind);
    }
    return e;
}

ConditionConfig parse_condition(const json& j, const std::filesystem::path& base) {
    ConditionConfig c;
    c.program_path = j.at("program").get<std::string>();
    c.program = datalog::parse_program_file(resolve(base, c.program_path));
    c.goal = j.at("goal").get<std::string>();
    if (!c.program->is_intensional(c.goal))
        throw ConfigError("goal '" + c.goal + "' is not derived by " + c.program_path);
    if (j.contains("channel")) c.channel = j.at("channel").get<std::string>();
    if (j.contains("outputRelation")) c.output_relation = j.at("outputRelation").get<std::string>();
    return c;
}

RoutingCondition parse_routing_condition(const json& j, const std::filesystem::path& base) {
    ConditionConfig c = parse_condition(j, base);
    return RoutingCondition{c.program, c.goal};
}

PatternNode parse_node(const json& j, const std::filesystem::path& base, size_t index) {
    PatternNode n;
    std::string kind = j.at("kind").get<std::string>();
    n.name = j.contains("name") ? j.at("name").get<std::string>()
                                : kind + "-" + std::to_string(index);

    auto load_program = [&](const char* key) {
        n.program = datalog::parse_program_file(resolve(base, j.at(key).get<std::string>()));
    };

    if (kind == "router") {
        n.kind = NodeKind::Router;
        for (const auto& c : j.at("conditions")) n.conditions.push_back(parse_condition(c, base));
        if (n.conditions.empty() && !j.contains("defaultChannel"))
            throw ConfigError("router needs conditions or a default channel");
        for (const auto& c : n.conditions)
            if (c.channel.empty()) throw ConfigError("router condition without channel");
        if (j.contains("defaultChannel")) n.default_channel = j.at("defaultChannel").get<std::string>();
        if (j.contains("mode")) {
            std::string m = j.at("mode").get<std::string>();
            if (m == "single") n.mode = RouterMode::Single;
            else if (m == "partition") n.mode = RouterMode::Partition;
            else throw ConfigError("unknown router mode: " + m);
        }
        if (j.contains("existsMode")) n.exists_mode = j.at("existsMode").get<bool>();
    } else if (kind == "filter") {
        n.kind = NodeKind::Filter;
        load_program("program");
        n.goal = j.at("goal").get<std::string>();
        if (j.contains("existsMode")) n.exists_mode = j.at("existsMode").get<bool>();
    } else if (kind == "multicast") {
        n.kind = NodeKind::Multicast;
        for (const auto& c : j.at("channels")) n.channels.push_back(c.get<std::string>());
        if (n.channels.empty()) throw ConfigError("multicast needs at least one channel");
    } else if (kind == "recipientList") {
        n.kind = NodeKind::RecipientList;
        load_program("program");
        n.goal = j.at("goal").get<std::string>();
        for (auto it = j.at("registry").begin(); it != j.at("registry").end(); ++it)
            n.registry[it.key()] = it.value().get<std::string>();
        if (n.registry.empty()) throw ConfigError("recipient list needs a registry");
    } else if (kind == "splitter") {
        n.kind = NodeKind::Splitter;
        if (j.contains("byRecordId")) {
            n.split_by_record = j.at("byRecordId").get<std::string>();
        } else {
            for (const auto& c : j.at("conditions")) n.conditions.push_back(parse_condition(c, base));
            if (n.conditions.empty()) throw ConfigError("splitter needs conditions");
        }
    } else if (kind == "aggregator") {
        n.kind = NodeKind::AggregatorNode;
        AggregatorConfig cfg;
        cfg.correlation = parse_routing_condition(j.at("correlation"), base);
        if (j.contains("completion"))
            cfg.completion = parse_routing_condition(j.at("completion"), base);
        if (j.contains("maxCount")) cfg.max_count = j.at("maxCount").get<size_t>();
        if (j.contains("timeoutMs"))
            cfg.timeout = std::chrono::milliseconds(j.at("timeoutMs").get<int64_t>());
        if (!cfg.completion && !cfg.max_count && !cfg.timeout)
            throw ConfigError("aggregator needs a completion condition, maxCount or timeoutMs");
        if (j.contains("partitions")) cfg.partitions = j.at("partitions").get<size_t>();
        n.aggregator = std::move(cfg);
    } else if (kind == "translator") {
        n.kind = NodeKind::Translator;
        load_program("program");
        n.goal = j.at("goal").get<std::string>();
    } else if (kind == "contentFilter") {
        n.kind = NodeKind::ContentFilter;
        load_program("program");
        n.goal = j.at("goal").get<std::string>();
    } else if (kind == "enricher") {
        n.kind = NodeKind::Enricher;
        if (j.contains("facts"))
            n.enrich_data = datalog::parse_facts_file(resolve(base, j.at("facts").get<std::string>()));
        if (j.contains("program")) load_program("program");
        if (!j.contains("facts") && !j.contains("program"))
            throw ConfigError("enricher needs facts or a program");
    } else if (kind == "baselineRouter") {
        n.kind = NodeKind::BaselineRouter;
        n.variant = j.contains("variant") ? j.at("variant").get<std::string>() : "order";
        if (n.variant != "order" && n.variant != "customer-join")
            throw ConfigError("unknown baseline variant: " + n.variant);
        n.channels.push_back(j.at("channel").get<std::string>());
        n.default_channel = j.at("defaultChannel").get<std::string>();
    } else if (kind == "baselineTranslator") {
        n.kind = NodeKind::BaselineTranslator;
    } else if (kind == "voidSink") {
        n.kind = NodeKind::VoidSinkNode;
        n.sink_channel = j.contains("channel") ? j.at("channel").get<std::string>() : "void";
    } else {
        throw ConfigError("unknown node kind: " + kind);
    }

    if ((n.kind == NodeKind::Filter || n.kind == NodeKind::RecipientList ||
         n.kind == NodeKind::Translator || n.kind == NodeKind::ContentFilter) &&
        !n.program->is_intensional(n.goal))
        throw ConfigError("goal '" + n.goal + "' is not derived by the node program");

    return n;
}

bool node_is_terminal(const PatternNode& n) {
    switch (n.kind) {
        case NodeKind::Router:
        case NodeKind::Multicast:
        case NodeKind::RecipientList:
        case NodeKind::BaselineRouter:
        case NodeKind::VoidSinkNode:
            return true;
        default:
            return false;
    }
}

} // namespace

std::optional<size_t> RouteDefinition::node_target(const std::string& channel, size_t after) const {
    for (size_t i = after + 1; i < nodes.size(); ++i)
        if (nodes[i].name == channel) return i;
    return std::nullopt;
}

RouteDefinition load_route(const std::string& config_text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(config_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("route config is not valid JSON: ") + e.what());
    }

    RouteDefinition r;
    r.base_dir = base_dir;
    try {
        r.name = j.at("name").get<std::string>();
        r.source = parse_endpoint(j.at("source"), base_dir, true);
        if (j.contains("workerThreads")) r.worker_threads = j.at("workerThreads").get<int>();
        if (r.worker_threads < 1) throw ConfigError("workerThreads must be >= 1");
        r.schemas = j.contains("schemas")
                        ? SchemaRegistry::from_json_file(resolve(base_dir, j.at("schemas").get<std::string>()))
                        : SchemaRegistry::builtin();
        size_t idx = 0;
        if (j.contains("nodes"))
            for (const auto& nj : j.at("nodes")) r.nodes.push_back(parse_node(nj, base_dir, idx++));
        if (j.contains("sinks"))
            for (auto it = j.at("sinks").begin(); it != j.at("sinks").end(); ++it)
                r.sinks[it.key()] = parse_endpoint(it.value(), base_dir, false);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("route config: ") + e.what());
    }

    // channel wiring: every emitted channel must resolve to a sink or a
    // later node; a fall-through chain end needs the "out" sink
    auto check_channel = [&](const std::string& ch, size_t node_idx) {
        if (ch.empty()) throw ConfigError("empty channel name in node " + r.nodes[node_idx].name);
        if (r.sinks.count(ch) || ch == kDeadChannel) return;
        if (r.node_target(ch, node_idx)) return;
        throw ConfigError("channel '" + ch + "' of node " + r.nodes[node_idx].name +
                          " maps to no sink or later node");
    };
    for (size_t i = 0; i < r.nodes.size(); ++i) {
        const PatternNode& n = r.nodes[i];
        for (const auto& c : n.conditions)
            if (!c.channel.empty()) check_channel(c.channel, i);
        if (!n.default_channel.empty()) check_channel(n.default_channel, i);
        for (const auto& ch : n.channels) check_channel(ch, i);
        for (const auto& [_, ch] : n.registry) check_channel(ch, i);
        if (n.kind == NodeKind::VoidSinkNode && !r.sinks.count(n.sink_channel))
            r.sinks[n.sink_channel] = Endpoint{Endpoint::Kind::VoidSink, {}, StreamFormat::Ndjson, "", {}};
    }
    bool falls_through = r.nodes.empty() || !node_is_terminal(r.nodes.back());
    if (falls_through && !r.sinks.count(kOutChannel))
        throw ConfigError("route can fall through the chain end but has no 'out' sink");

    return r;
}

RouteDefinition load_route_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open route file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_route(ss.str(), path.parent_path());
}

} // namespace tipflow
