#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tipflow/datagen.hpp"
#include "tipflow/patterns.hpp"

namespace tipflow {

enum class NodeKind {
    Router,
    Filter,
    Multicast,
    RecipientList,
    Splitter,
    AggregatorNode,
    Translator,
    ContentFilter,
    Enricher,
    BaselineRouter,
    BaselineTranslator,
    VoidSinkNode
};

enum class RouterMode { Single, Partition };

struct ConditionConfig {
    std::string program_path;
    datalog::ProgramPtr program;
    std::string goal;
    std::string channel;
    std::string output_relation; // splitter only
};

/// One pattern stage; which config fields apply depends on the kind
/// (validated at load time).
struct PatternNode {
    NodeKind kind = NodeKind::Router;
    std::string name;

    std::vector<ConditionConfig> conditions;     // router / splitter
    std::string default_channel;                 // router / baseline routers
    RouterMode mode = RouterMode::Single;        // router
    bool exists_mode = false;                    // router / filter
    std::string split_by_record;                 // splitter: relation name, per-record-id split

    std::vector<std::string> channels;           // multicast
    std::map<std::string, std::string> registry; // recipient list

    datalog::ProgramPtr program;                 // filter / translator / contentFilter / enricher
    std::string goal;

    Database enrich_data;                        // enricher

    std::optional<AggregatorConfig> aggregator;  // aggregator

    std::string variant;                         // baselineRouter: "order" | "customer-join"
    std::string sink_channel;                    // voidSink
};

struct Endpoint {
    enum class Kind { FileSource, GeneratorSource, VoidSink, FileSink, CountingSink };
    Kind kind = Kind::VoidSink;
    std::filesystem::path path;
    StreamFormat format = StreamFormat::Ndjson;
    std::string schema;
    std::optional<GenSpec> gen;
};

/// Messages flow through `nodes` in order; router-style nodes emit to
/// named channels, which resolve to sinks or to later nodes by name.
/// Messages falling off the end of the chain leave on the "out" channel.
struct RouteDefinition {
    std::string name;
    Endpoint source;
    std::vector<PatternNode> nodes;
    std::map<std::string, Endpoint> sinks;
    int worker_threads = 1;
    SchemaRegistry schemas;
    std::filesystem::path base_dir;

    /// Channel resolution: index of the target node, or nullopt for a sink.
    std::optional<size_t> node_target(const std::string& channel, size_t after) const;
};

inline constexpr const char* kOutChannel = "out";
inline constexpr const char* kDeadChannel = "dead";

/// Parse and validate a route config (JSON). Referenced Datalog programs
/// and fact files are loaded eagerly, relative to the config's directory.
RouteDefinition load_route(const std::string& config_text, const std::filesystem::path& base_dir);
RouteDefinition load_route_file(const std::filesystem::path& path);

} // namespace tipflow
