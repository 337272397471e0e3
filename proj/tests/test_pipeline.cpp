#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "tipflow/baseline.hpp"
#include "tipflow/engine.hpp"
#include "tipflow/errors.hpp"
#include "tipflow/parser.hpp"

using namespace tipflow;
using nlohmann::json;

namespace {

std::filesystem::path src_dir() {
    const char* env = std::getenv("TIPFLOW_SRC");
    return env ? std::filesystem::path(env) : std::filesystem::path("..");
}

const SchemaRegistry& schemas() {
    static SchemaRegistry reg = SchemaRegistry::builtin();
    return reg;
}

std::vector<Message> generated_orders(int n, uint64_t seed) {
    OrderGenerator gen(seed, 256);
    std::vector<Message> out;
    for (int i = 0; i < n; ++i)
        out.push_back(record_to_message(json::parse(gen.next_line()), *schemas().find("order")));
    return out;
}

RouteDefinition order_router_route() {
    return load_route_file(src_dir() / "routes/cbr_order.route.json");
}

std::map<std::string, std::set<Tuple, datalog::TupleLess>> body_facts(const Message& m) {
    std::map<std::string, std::set<Tuple, datalog::TupleLess>> out;
    for (const auto& [name, rel] : m.body) {
        auto& s = out[name];
        for (const Tuple& t : *rel) s.insert(t);
    }
    return out;
}

} // namespace

TEST_CASE("load_route") {
    SUBCASE("router route: source, condition, two void sinks, default channel") {
        RouteDefinition r = order_router_route();
        REQUIRE(r.nodes.size() == 1);
        CHECK(r.nodes[0].kind == NodeKind::Router);
        CHECK(r.nodes[0].conditions.size() == 1);
        CHECK(r.nodes[0].default_channel == "standard");
        CHECK(r.sinks.count("urgent") == 1);
        CHECK(r.sinks.count("standard") == 1);
        CHECK(r.nodes[0].conditions[0].program->is_intensional("cbr-order"));
    }
    SUBCASE("translator route: one node plus void sink") {
        RouteDefinition r = load_route_file(src_dir() / "routes/mt_order.route.json");
        REQUIRE(r.nodes.size() == 1);
        CHECK(r.nodes[0].kind == NodeKind::Translator);
        CHECK(r.sinks.count("out") == 1);
    }
    SUBCASE("route referencing a missing sink fails") {
        std::string bad = R"({
            "name": "broken",
            "source": {"kind": "file", "format": "ndjson"},
            "nodes": [{"kind": "router",
                       "conditions": [{"program": "programs/cbr_order.dl",
                                       "goal": "cbr-order", "channel": "nowhere"}],
                       "defaultChannel": "standard"}],
            "sinks": {"standard": {"kind": "void"}}
        })";
        CHECK_THROWS_AS(load_route(bad, src_dir()), ConfigError);
    }
    SUBCASE("fall-through chain needs an out sink") {
        std::string bad = R"({
            "name": "no-out",
            "source": {"kind": "file", "format": "ndjson"},
            "nodes": [{"kind": "translator", "program": "programs/mt_order.dl",
                       "goal": "conv-order"}],
            "sinks": {}
        })";
        CHECK_THROWS_AS(load_route(bad, src_dir()), ConfigError);
    }
    SUBCASE("datalog errors propagate from eager program loading") {
        std::string bad = R"({
            "name": "bad-program",
            "source": {"kind": "file", "format": "ndjson"},
            "nodes": [{"kind": "translator", "program": "programs/schemas.json",
                       "goal": "conv-order"}],
            "sinks": {"out": {"kind": "void"}}
        })";
        CHECK_THROWS_AS(load_route(bad, src_dir()), SyntaxError);
    }
}

TEST_CASE("run conservation and counts") {
    RouteDefinition route = order_router_route();

    SUBCASE("router counts add up to the input") {
        VectorMessageSource source(generated_orders(1000, 31));
        RunStats stats = run(route, source);
        CHECK(stats.source_messages == 1000);
        CHECK(stats.records_per_channel.at("urgent") + stats.records_per_channel.at("standard") ==
              1000);
        CHECK(stats.conserved());
        CHECK(stats.records_per_channel.at("urgent") > 0);
    }
    SUBCASE("empty source") {
        VectorMessageSource source(std::vector<Message>{});
        RunStats stats = run(route, source);
        CHECK(stats.source_messages == 0);
        CHECK(stats.routed_records() == 0);
        CHECK(stats.conserved());
    }
    SUBCASE("translator is 1:1") {
        RouteDefinition mt = load_route_file(src_dir() / "routes/mt_order.route.json");
        VectorMessageSource source(generated_orders(1000, 32));
        RunStats stats = run(mt, source);
        CHECK(stats.messages_per_channel.at("out") == 1000);
        CHECK(stats.conserved());
    }
    SUBCASE("filter counts dropped records") {
        std::string cfg = R"({
            "name": "filtered",
            "source": {"kind": "file", "format": "ndjson"},
            "nodes": [{"kind": "filter", "program": "programs/cbr_order.dl", "goal": "cbr-order"}],
            "sinks": {"out": {"kind": "void"}}
        })";
        RouteDefinition route2 = load_route(cfg, src_dir());
        VectorMessageSource source(generated_orders(500, 33));
        RunStats stats = run(route2, source);
        CHECK(stats.messages_per_channel.at("out") + stats.filtered_records == 500);
        CHECK(stats.filtered_records > 0);
        CHECK(stats.conserved());
    }
}

TEST_CASE("run determinism and thread neutrality") {
    RouteDefinition route = order_router_route();
    auto msgs = generated_orders(2000, 77);

    RunOptions one;
    one.threads = 1;
    VectorMessageSource s1(msgs);
    RunStats r1 = run(route, s1, one);
    VectorMessageSource s2(msgs);
    RunStats r2 = run(route, s2, one);
    CHECK(r1.records_per_channel == r2.records_per_channel);

    RunOptions four;
    four.threads = 4;
    VectorMessageSource s3(msgs);
    RunStats r4 = run(route, s3, four);
    CHECK(r1.records_per_channel == r4.records_per_channel);
    CHECK(r4.conserved());

    RunStats rp = run_preloaded(route, msgs, 4);
    CHECK(rp.records_per_channel == r1.records_per_channel);
}

TEST_CASE("record tap sees every record exactly once") {
    RouteDefinition route = order_router_route();
    auto msgs = generated_orders(200, 5);
    std::map<std::string, std::string> taps;
    RunOptions opts;
    opts.record_tap = [&](const std::string& id, const std::string& ch) {
        CHECK(taps.emplace(id, ch).second);
    };
    VectorMessageSource source(msgs);
    RunStats stats = run(route, source, opts);
    CHECK(taps.size() == 200);
    CHECK(stats.conserved());
}

TEST_CASE("router channel may target a later node") {
    std::string cfg = R"({
        "name": "chained",
        "source": {"kind": "file", "format": "ndjson"},
        "nodes": [
            {"kind": "router", "name": "gate",
             "conditions": [{"program": "programs/cbr_order.dl",
                             "goal": "cbr-order", "channel": "project"}],
             "defaultChannel": "standard"},
            {"kind": "translator", "name": "project",
             "program": "programs/mt_order.dl", "goal": "conv-order"}
        ],
        "sinks": {"standard": {"kind": "void"}, "out": {"kind": "void"}}
    })";
    RouteDefinition route = load_route(cfg, src_dir());
    VectorMessageSource source(generated_orders(400, 21));
    RunStats stats = run(route, source);
    CHECK(stats.messages_per_channel.at("out") > 0);
    CHECK(stats.messages_per_channel.at("out") + stats.messages_per_channel.at("standard") == 400);
    CHECK(stats.conserved());
}

TEST_CASE("aggregator node collects and emits downstream") {
    std::string cfg = R"({
        "name": "agg-route",
        "source": {"kind": "file", "format": "ndjson"},
        "nodes": [
            {"kind": "aggregator", "name": "batch",
             "correlation": {"program": "programs/corr_const.dl", "goal": "corr"},
             "maxCount": 50}
        ],
        "sinks": {"out": {"kind": "void"}}
    })";
    std::filesystem::path tmp = std::filesystem::temp_directory_path() / "tipflow_test_agg";
    std::filesystem::create_directories(tmp / "programs");
    std::ofstream(tmp / "programs/corr_const.dl")
        << "corr(\"all\") :- order(a,b,c,d,e,f,g).\n";
    RouteDefinition route = load_route(cfg, tmp);

    VectorMessageSource source(generated_orders(120, 8));
    RunStats stats = run(route, source);
    // 120 singles -> two full batches of 50 plus a drained partial of 20
    CHECK(stats.messages_per_channel.at("out") == 3);
    std::filesystem::remove_all(tmp);
}

TEST_CASE("file sink writes records back out") {
    std::filesystem::path out_file =
        std::filesystem::temp_directory_path() / "tipflow_test_sink.ndjson";
    std::string cfg = R"({
        "name": "to-file",
        "source": {"kind": "file", "format": "ndjson"},
        "nodes": [],
        "sinks": {"out": {"kind": "file", "path": ")" + out_file.string() + R"("}}
    })";
    RouteDefinition route = load_route(cfg, src_dir());
    VectorMessageSource source(generated_orders(25, 3));
    RunStats stats = run(route, source);
    CHECK(stats.messages_per_channel.at("out") == 25);

    std::ifstream in(out_file);
    MessageStream stream(in, schemas());
    size_t n = 0;
    while (stream.next()) ++n;
    CHECK(n == 25);
    std::filesystem::remove(out_file);
}

TEST_CASE("generator source feeds a route directly") {
    std::string cfg = R"({
        "name": "gen-route",
        "source": {"kind": "generator", "generate": "orders", "count": 300, "seed": 4},
        "nodes": [],
        "sinks": {"out": {"kind": "void"}}
    })";
    RouteDefinition route = load_route(cfg, src_dir());
    GeneratorMessageSource source(*route.source.gen, route.schemas);
    RunStats stats = run(route, source);
    CHECK(stats.messages_per_channel.at("out") == 300);
}

TEST_CASE("scatter_gather") {
    auto enricher_node = [](const std::string& rel, const std::string& value) {
        PatternNode n;
        n.kind = NodeKind::Enricher;
        Relation r(rel, 1);
        r.insert({Constant(value)});
        n.enrich_data.put(std::move(r));
        return n;
    };
    Message msg = generated_orders(1, 12)[0];

    SUBCASE("two branches enriching disjoint relations") {
        Message out = scatter_gather(msg, {{enricher_node("left", "a")}, {enricher_node("right", "b")}});
        CHECK(out.body.find("left"));
        CHECK(out.body.find("right"));
        CHECK(out.body.find("order")->size() == 1);
    }
    SUBCASE("single branch equals branch output") {
        Message out = scatter_gather(msg, {{enricher_node("only", "x")}});
        CHECK(out.body.find("only"));
        CHECK(out.body.find("order")->size() == 1);
    }
    SUBCASE("branch failure below quorum raises") {
        PatternNode failing;
        failing.kind = NodeKind::RecipientList;
        failing.program = datalog::parse_program_shared("config(y) :- nosuch(x,y).");
        failing.goal = "config";
        failing.registry = {{"k", "out"}};
        CHECK_THROWS_AS(scatter_gather(msg, {{enricher_node("a", "1")}, {failing}}, 2), Error);
        // quorum of one tolerates the failing branch
        Message out = scatter_gather(msg, {{enricher_node("a", "1")}, {failing}}, 1);
        CHECK(out.body.find("a"));
    }
}

TEST_CASE("splitter_gather") {
    auto orders = generated_orders(10, 44);
    Message bulk = bulk_assemble(orders, 10)[0];
    auto split = record_split_conditions(bulk, "order");

    PatternNode translate;
    translate.kind = NodeKind::Translator;
    translate.program = datalog::parse_program_file(src_dir() / "programs/mt_order.dl");
    translate.goal = "conv-order";

    SUBCASE("ten parts translated and gathered") {
        Message out = splitter_gather(bulk, split, {translate});
        REQUIRE(out.body.find("conv-order"));
        CHECK(out.body.find("conv-order")->size() == 10);
    }
    SUBCASE("single-part split equals plain branch application") {
        Message single = orders[0];
        auto conds = record_split_conditions(single, "order");
        REQUIRE(conds.size() == 1);
        Message gathered = splitter_gather(single, conds, {translate});
        Message plain = message_translator(single, *translate.program, "conv-order");
        CHECK(body_facts(gathered).at("conv-order") == body_facts(plain).at("conv-order"));
    }
    SUBCASE("parallel and sequential gathering agree") {
        Message seq = splitter_gather(bulk, split, {translate}, false);
        Message par = splitter_gather(bulk, split, {translate}, true);
        CHECK(body_facts(seq) == body_facts(par));
    }
}
