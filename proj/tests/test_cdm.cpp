#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "tipflow/errors.hpp"
#include "tipflow/json_io.hpp"

using namespace tipflow;
using nlohmann::json;

namespace {

const SchemaRegistry& schemas() {
    static SchemaRegistry reg = SchemaRegistry::builtin();
    return reg;
}

json order_record(const std::string& id, int64_t orderkey, int64_t custkey, double price,
                  const std::string& prio, int64_t ship) {
    return json{{"id", id},          {"objecttype", "order"}, {"ORDERKEY", orderkey},
                {"CUSTKEY", custkey}, {"OTOTALPRICE", price},  {"OPRIORITY", prio},
                {"SHIPPRIORITY", ship}};
}

Message order_message(const std::string& id, int64_t orderkey, int64_t custkey, double price,
                      const std::string& prio = "3-MEDIUM", int64_t ship = 0) {
    return record_to_message(order_record(id, orderkey, custkey, price, prio, ship),
                             *schemas().find("order"));
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

TEST_CASE("record_to_message") {
    SUBCASE("positional mapping") {
        json rec = order_record("m1", 7, 13, 42.5, "3-MEDIUM", 0);
        Message msg = record_to_message(rec, *schemas().find("order"));
        CHECK(msg.id == "m1");
        const Relation* body = msg.body.find("order");
        REQUIRE(body);
        CHECK(body->size() == 1);
        Tuple want{Constant("m1"), Constant("order"), Constant(7), Constant(13),
                   Constant(42.5), Constant("3-MEDIUM"), Constant(0)};
        CHECK(body->contains(want));
        const Relation* meta = msg.header.find(kMetaRelation);
        REQUIRE(meta);
        CHECK(meta->contains({Constant("m1"), Constant("order")}));
    }
    SUBCASE("missing field") {
        json rec = order_record("m1", 7, 13, 42.5, "3-MEDIUM", 0);
        rec.erase("OTOTALPRICE");
        CHECK_THROWS_AS(record_to_message(rec, *schemas().find("order")), MissingField);
    }
    SUBCASE("type mismatch") {
        json rec = order_record("m1", 7, 13, 42.5, "3-MEDIUM", 0);
        rec["ORDERKEY"] = "seven";
        CHECK_THROWS_AS(record_to_message(rec, *schemas().find("order")), TypeMismatch);
    }
    SUBCASE("extra fields like padding are ignored") {
        json rec = order_record("m1", 7, 13, 42.5, "3-MEDIUM", 0);
        rec["padding"] = "xxxx";
        Message msg = record_to_message(rec, *schemas().find("order"));
        CHECK(msg.body.find("order")->size() == 1);
    }
    SUBCASE("round trip is the identity on schema fields") {
        json rec = order_record("m1", 7, 13, 42.5, "1-URGENT", 0);
        Message msg = record_to_message(rec, *schemas().find("order"));
        json back = message_to_record(msg, schemas());
        CHECK(json(back) == rec);
    }
}

TEST_CASE("multiformat_to_message") {
    json cust{{"id", "c1"},   {"objecttype", "customer"}, {"CUSTKEY", 1},
              {"NAME", "Customer#000000001"}, {"CNATIONKEY", 7}, {"PHONE", "17-000-000-0000"},
              {"ACCTBAL", 5000.0}, {"MKTSEGMENT", "BUILDING"}};
    auto nation = [](int key, const std::string& name, int region) {
        return json{{"objecttype", "nation"}, {"NATIONKEY", key}, {"NNAME", name},
                    {"NREGIONKEY", region},   {"NCOMMENT", ""}};
    };

    SUBCASE("one customer plus 25 nations") {
        json ctx = json::array();
        for (int i = 0; i < 25; ++i) ctx.push_back(nation(i, "N" + std::to_string(i), i % 5));
        Message msg = multiformat_to_message(cust, ctx, schemas());
        CHECK(msg.body.find("customer")->size() == 1);
        CHECK(msg.body.find("nation")->size() == 25);
        // context facts share the primary message id in position 0
        for (const Tuple& t : *msg.body.find("nation")) CHECK(t[0] == Constant("c1"));
    }
    SUBCASE("no context records") {
        Message msg = multiformat_to_message(cust, json::array(), schemas());
        CHECK(msg.body.find("customer"));
        CHECK(msg.body.find("nation") == nullptr);
    }
    SUBCASE("duplicate context tuples collapse only when fully equal") {
        json ctx = json::array({nation(3, "A", 1), nation(3, "A", 1), nation(3, "A", 2)});
        Message msg = multiformat_to_message(cust, ctx, schemas());
        CHECK(msg.body.find("nation")->size() == 2);
    }
}

TEST_CASE("bulk assemble and split") {
    auto make = [&](int n) {
        std::vector<Message> msgs;
        for (int i = 0; i < n; ++i)
            msgs.push_back(order_message("m" + std::to_string(i), i + 1, 13, 100.0 + i));
        return msgs;
    };

    SUBCASE("group count is ceil(n/k)") {
        CHECK(bulk_assemble(make(1500), 10).size() == 150);
        // the million-scale case reduces to the same ceiling division
        CHECK((1500000 + 10 - 1) / 10 == 150000);
    }
    SUBCASE("remainder group") {
        auto bulks = bulk_assemble(make(5), 10);
        REQUIRE(bulks.size() == 1);
        CHECK(record_count(bulks[0]) == 5);
        CHECK(is_bulk(bulks[0]));
    }
    SUBCASE("k=1 is the identity") {
        auto msgs = make(4);
        auto out = bulk_assemble(msgs, 1);
        REQUIRE(out.size() == 4);
        for (size_t i = 0; i < 4; ++i) {
            CHECK(out[i].id == msgs[i].id);
            CHECK(body_facts(out[i]) == body_facts(msgs[i]));
        }
    }
    SUBCASE("split restores the original sequence") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 10; ++trial) {
            int n = 1 + static_cast<int>(rng() % 40);
            size_t k = 1 + rng() % 12;
            auto msgs = make(n);
            std::vector<Message> round;
            for (const Message& bulk : bulk_assemble(msgs, k))
                for (Message& part : k == 1 ? std::vector<Message>{bulk} : bulk_split(bulk))
                    round.push_back(std::move(part));
            REQUIRE(round.size() == msgs.size());
            for (size_t i = 0; i < msgs.size(); ++i) {
                CHECK(round[i].id == msgs[i].id);
                CHECK(body_facts(round[i]) == body_facts(msgs[i]));
            }
        }
    }
    SUBCASE("streaming assembler agrees with the list form") {
        auto msgs = make(23);
        BulkAssembler asmb(10);
        std::vector<Message> streamed;
        for (const Message& m : msgs)
            if (auto b = asmb.push(m)) streamed.push_back(std::move(*b));
        if (auto b = asmb.flush()) streamed.push_back(std::move(*b));
        auto listed = bulk_assemble(msgs, 10);
        REQUIRE(streamed.size() == listed.size());
        for (size_t i = 0; i < listed.size(); ++i) {
            CHECK(streamed[i].id == listed[i].id);
            CHECK(body_facts(streamed[i]) == body_facts(listed[i]));
        }
    }
    SUBCASE("arity conflict raises SchemaMismatch") {
        std::vector<Message> msgs = make(1);
        Message odd;
        odd.id = "x";
        Relation rel("order", 3);
        rel.insert({Constant("x"), Constant("order"), Constant(1)});
        odd.body.put(std::move(rel));
        msgs.push_back(odd);
        CHECK_THROWS_AS(bulk_assemble(msgs, 2), SchemaMismatch);
    }
}

TEST_CASE("schema registry file") {
    const char* env = std::getenv("TIPFLOW_SRC");
    std::filesystem::path src = env ? env : "..";
    SchemaRegistry reg = SchemaRegistry::from_json_file(src / "programs/schemas.json");
    const Schema* order = reg.find("order");
    REQUIRE(order);
    CHECK(order->fields == std::vector<std::string>{"id", "objecttype", "ORDERKEY", "CUSTKEY",
                                                    "OTOTALPRICE", "OPRIORITY", "SHIPPRIORITY"});
    CHECK(order->types[0] == FieldType::Str);
    CHECK(order->types[4] == FieldType::Float);
    CHECK(reg.find("customer")->fields.size() == 8);
    CHECK(reg.find("nation")->fields.size() == 6);

    // a registry file may add new relations over the builtin set
    auto extra = std::filesystem::temp_directory_path() / "tipflow_cdm_schema.json";
    std::ofstream(extra) << R"({"event": {"fields": [["id","string"],["objecttype","string"],)"
                         << R"(["SEQ","integer"],["VALUE","float"]]}})";
    SchemaRegistry merged = SchemaRegistry::from_json_file(extra);
    REQUIRE(merged.find("event"));
    CHECK(merged.find("event")->types[3] == FieldType::Float);
    CHECK(merged.find("order")); // builtins still present
    std::filesystem::remove(extra);

    Message msg = record_to_message(
        json{{"id", "e1"}, {"objecttype", "event"}, {"SEQ", 4}, {"VALUE", 2.5}},
        *merged.find("event"));
    CHECK(msg.body.find("event")->contains({Constant("e1"), Constant("event"), Constant(4), Constant(2.5)}));
}

TEST_CASE("stream_parse") {
    auto line = [](const std::string& id) {
        return order_record(id, 1, 2, 10.0, "5-LOW", 0).dump();
    };

    SUBCASE("three lines in order") {
        std::istringstream in(line("a") + "\n" + line("b") + "\n" + line("c") + "\n");
        MessageStream stream(in, schemas());
        std::vector<std::string> ids;
        while (auto m = stream.next()) ids.push_back(m->id);
        CHECK(ids == std::vector<std::string>{"a", "b", "c"});
        CHECK(stream.error_count() == 0);
    }
    SUBCASE("malformed middle line is skipped and counted") {
        std::istringstream in(line("a") + "\n{broken json\n" + line("c") + "\n");
        MessageStream stream(in, schemas());
        std::vector<std::string> ids;
        while (auto m = stream.next()) ids.push_back(m->id);
        CHECK(ids == std::vector<std::string>{"a", "c"});
        CHECK(stream.error_count() == 1);
    }
    SUBCASE("record missing a schema field is skipped and counted") {
        json bad = order_record("b", 1, 2, 3.0, "5-LOW", 0);
        bad.erase("CUSTKEY");
        std::istringstream in(line("a") + "\n" + bad.dump() + "\n");
        MessageStream stream(in, schemas());
        std::vector<std::string> ids;
        while (auto m = stream.next()) ids.push_back(m->id);
        CHECK(ids == std::vector<std::string>{"a"});
        CHECK(stream.error_count() == 1);
    }
    SUBCASE("empty input") {
        std::istringstream in("");
        MessageStream stream(in, schemas());
        CHECK(!stream.next());
        CHECK(stream.error_count() == 0);
    }
    SUBCASE("json array format") {
        std::string doc = "[\n" + line("a") + ",\n" + line("b") + "\n]\n";
        std::istringstream in(doc);
        MessageStream stream(in, schemas(), StreamFormat::JsonArray);
        std::vector<std::string> ids;
        while (auto m = stream.next()) ids.push_back(m->id);
        CHECK(ids == std::vector<std::string>{"a", "b"});
    }
    SUBCASE("multiformat records come back with context") {
        json cust{{"id", "c9"},  {"objecttype", "customer"}, {"CUSTKEY", 9},
                  {"NAME", "n"}, {"CNATIONKEY", 1},          {"PHONE", "p"},
                  {"ACCTBAL", 1.5}, {"MKTSEGMENT", "s"}};
        cust["context"] = json::array({json{{"objecttype", "nation"},
                                            {"NATIONKEY", 1},
                                            {"NNAME", "X"},
                                            {"NREGIONKEY", 3},
                                            {"NCOMMENT", ""}}});
        std::istringstream in(cust.dump() + "\n");
        MessageStream stream(in, schemas());
        auto msg = stream.next();
        REQUIRE(msg);
        CHECK(msg->body.find("nation")->size() == 1);
    }
}
