#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "tipflow/baseline.hpp"
#include "tipflow/datagen.hpp"
#include "tipflow/engine.hpp"
#include "tipflow/errors.hpp"
#include "tipflow/parser.hpp"

using namespace tipflow;
using nlohmann::json;

namespace {

std::filesystem::path tmp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("tipflow_datagen_" + name);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GenSpec order_spec(uint64_t count, uint64_t seed, const std::filesystem::path& out) {
    GenSpec s;
    s.kind = GenKind::Orders;
    s.count = count;
    s.seed = seed;
    s.out = out;
    return s;
}

/// Independent selectivity oracle: a plain sequential scan over the raw
/// JSON records, no fact tables, no baseline operators.
size_t scan_orders_matching(const std::filesystem::path& file) {
    std::ifstream in(file);
    std::string line;
    size_t hits = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        if (rec.at("OPRIORITY").get<std::string>() == "1-URGENT" &&
            rec.at("OTOTALPRICE").get<double>() > 100000.00)
            ++hits;
    }
    return hits;
}

size_t scan_customers_matching(const std::filesystem::path& file) {
    std::ifstream in(file);
    std::string line;
    size_t hits = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        if (!(rec.at("ACCTBAL").get<double>() > 3000.0)) continue;
        int64_t ck = rec.at("CNATIONKEY").get<int64_t>();
        for (const auto& n : rec.at("context"))
            if (n.at("NATIONKEY").get<int64_t>() == ck && n.at("NREGIONKEY").get<int64_t>() == 3) {
                ++hits;
                break;
            }
    }
    return hits;
}

} // namespace

TEST_CASE("nation table shape") {
    const auto& nations = nation_table();
    CHECK(nations.size() == 25);
    std::set<int64_t> regions, keys;
    bool europe_is_3 = false;
    for (const auto& n : nations) {
        regions.insert(n.region);
        keys.insert(n.key);
        if (std::string(n.name) == "GERMANY") europe_is_3 = n.region == 3;
    }
    CHECK(regions == std::set<int64_t>{0, 1, 2, 3, 4});
    CHECK(keys.size() == 25);
    CHECK(europe_is_3);
}

TEST_CASE("gen_orders") {
    SUBCASE("count zero produces an empty file") {
        auto f = tmp_file("empty.ndjson");
        gen_orders(order_spec(0, 1, f));
        CHECK(slurp(f).empty());
        std::filesystem::remove(f);
    }
    SUBCASE("same spec twice is byte-identical") {
        auto f1 = tmp_file("d1.ndjson"), f2 = tmp_file("d2.ndjson");
        gen_orders(order_spec(1000, 42, f1));
        gen_orders(order_spec(1000, 42, f2));
        CHECK(slurp(f1) == slurp(f2));
        CHECK(!slurp(f1).empty());
        std::filesystem::remove(f1);
        std::filesystem::remove(f2);
    }
    SUBCASE("different seeds differ") {
        auto f1 = tmp_file("s1.ndjson"), f2 = tmp_file("s2.ndjson");
        gen_orders(order_spec(100, 1, f1));
        gen_orders(order_spec(100, 2, f2));
        CHECK(slurp(f1) != slurp(f2));
        std::filesystem::remove(f1);
        std::filesystem::remove(f2);
    }
    SUBCASE("records are ~4kB, keys and ids unique, values in range") {
        auto f = tmp_file("shape.ndjson");
        gen_orders(order_spec(500, 7, f));
        std::ifstream in(f);
        std::string line;
        size_t n = 0, total_len = 0;
        std::set<std::string> ids;
        std::set<int64_t> orderkeys;
        size_t above = 0, below = 0;
        while (std::getline(in, line)) {
            ++n;
            total_len += line.size();
            json rec = json::parse(line);
            CHECK(ids.insert(rec.at("id").get<std::string>()).second);
            CHECK(orderkeys.insert(rec.at("ORDERKEY").get<int64_t>()).second);
            double price = rec.at("OTOTALPRICE").get<double>();
            CHECK(price >= 1000.0);
            CHECK(price <= 500000.0);
            (price > 100000.0 ? above : below)++;
            CHECK(rec.at("SHIPPRIORITY").get<int64_t>() == 0);
        }
        CHECK(n == 500);
        double mean = static_cast<double>(total_len) / 500.0;
        CHECK(mean > 4096.0 * 0.8);
        CHECK(mean < 4096.0 * 1.2);
        CHECK(above > 0);
        CHECK(below > 0);
        std::filesystem::remove(f);
    }
    SUBCASE("json array format round-trips through the stream parser") {
        auto f = tmp_file("arr.json");
        GenSpec s = order_spec(50, 3, f);
        s.format = StreamFormat::JsonArray;
        gen_orders(s);
        std::ifstream in(f);
        MessageStream stream(in, SchemaRegistry::builtin(), StreamFormat::JsonArray);
        size_t n = 0;
        while (stream.next()) ++n;
        CHECK(n == 50);
        CHECK(stream.error_count() == 0);
        std::filesystem::remove(f);
    }
}

TEST_CASE("gen_customer_nation") {
    auto f = tmp_file("cust.ndjson");
    GenSpec s;
    s.kind = GenKind::CustomerNation;
    s.count = 300;
    s.seed = 9;
    s.out = f;
    gen_customer_nation(s);

    SUBCASE("each record carries the full 25-row nation table") {
        std::ifstream in(f);
        std::string line;
        size_t n = 0, above = 0, below = 0;
        while (std::getline(in, line)) {
            ++n;
            json rec = json::parse(line);
            CHECK(rec.at("context").size() == 25);
            double bal = rec.at("ACCTBAL").get<double>();
            CHECK(bal >= -999.99);
            CHECK(bal <= 9999.99);
            (bal > 3000.0 ? above : below)++;
            int64_t ck = rec.at("CNATIONKEY").get<int64_t>();
            CHECK(ck >= 0);
            CHECK(ck <= 24);
        }
        CHECK(n == 300);
        CHECK(above > 0);
        CHECK(below > 0);
    }
    SUBCASE("count one parses into one customer plus 25 nations") {
        auto f1 = tmp_file("one.ndjson");
        GenSpec s1 = s;
        s1.count = 1;
        s1.out = f1;
        gen_customer_nation(s1);
        std::ifstream in(f1);
        MessageStream stream(in, SchemaRegistry::builtin());
        auto msg = stream.next();
        REQUIRE(msg);
        CHECK(msg->body.find("customer")->size() == 1);
        CHECK(msg->body.find("nation")->size() == 25);
        CHECK(!stream.next());
        std::filesystem::remove(f1);
    }
    std::filesystem::remove(f);
}

TEST_CASE("selectivity matches an independent scan") {
    SUBCASE("orders") {
        auto f = tmp_file("sel_orders.ndjson");
        GenSpec s = order_spec(5000, 123, f);
        s.target_record_bytes = 256;
        gen_orders(s);
        size_t expected = scan_orders_matching(f);
        CHECK(expected > 0);
        CHECK(expected < 5000);

        SchemaRegistry reg = SchemaRegistry::builtin();
        auto program = datalog::parse_program_file(
            std::filesystem::path(std::getenv("TIPFLOW_SRC") ? std::getenv("TIPFLOW_SRC") : "..") /
            "programs/cbr_order.dl");
        std::ifstream in(f);
        MessageStream stream(in, reg);
        size_t routed = 0;
        while (auto msg = stream.next())
            if (bool_rc(evaluate_condition(*msg, RoutingCondition{program, "cbr-order"}).get()))
                ++routed;
        CHECK(routed == expected);
        std::filesystem::remove(f);
    }
    SUBCASE("customers") {
        auto f = tmp_file("sel_cust.ndjson");
        GenSpec s;
        s.kind = GenKind::CustomerNation;
        s.count = 3000;
        s.seed = 321;
        s.out = f;
        gen_customer_nation(s);
        size_t expected = scan_customers_matching(f);
        CHECK(expected > 0);
        CHECK(expected < 3000);

        SchemaRegistry reg = SchemaRegistry::builtin();
        std::ifstream in(f);
        MessageStream stream(in, reg);
        ChannelTable table{{"hit"}, "miss"};
        size_t routed = 0;
        while (auto msg = stream.next())
            if (baseline_join_router(*msg, table).first == "hit") ++routed;
        CHECK(routed == expected);
        std::filesystem::remove(f);
    }
}

TEST_CASE("tbl import") {
    SUBCASE("orders.tbl") {
        auto tbl = tmp_file("orders.tbl");
        std::ofstream(tbl) << "1|37|O|131251.81|1996-01-02|5-LOW|Clerk#000000951|0|comment|\n"
                              "2|79|F|40183.29|1996-12-01|1-URGENT|Clerk#000000880|0|x|\n";
        auto out = tmp_file("orders_import.ndjson");
        import_orders_tbl(tbl, out, StreamFormat::Ndjson, 256);
        std::ifstream in(out);
        MessageStream stream(in, SchemaRegistry::builtin());
        auto m1 = stream.next();
        REQUIRE(m1);
        CHECK(m1->id == "o1");
        CHECK(m1->body.find("order")->contains({Constant("o1"), Constant("order"), Constant(1),
                                                Constant(37), Constant(131251.81),
                                                Constant("5-LOW"), Constant(0)}));
        auto m2 = stream.next();
        REQUIRE(m2);
        CHECK(m2->id == "o2");
        CHECK(!stream.next());
        std::filesystem::remove(tbl);
        std::filesystem::remove(out);
    }
    SUBCASE("customer.tbl with nation.tbl") {
        auto ctbl = tmp_file("customer.tbl");
        std::ofstream(ctbl) << "1|Customer#000000001|addr|15|25-989-741-2988|711.56|BUILDING|c|\n";
        auto ntbl = tmp_file("nation.tbl");
        std::ofstream(ntbl) << "0|ALGERIA|0|haggle|\n7|GERMANY|3|ruthless|\n";
        auto out = tmp_file("cust_import.ndjson");
        import_customer_nation_tbl(ctbl, ntbl, out);
        std::ifstream in(out);
        MessageStream stream(in, SchemaRegistry::builtin());
        auto m = stream.next();
        REQUIRE(m);
        CHECK(m->body.find("customer")->size() == 1);
        CHECK(m->body.find("nation")->size() == 2);
        std::filesystem::remove(ctbl);
        std::filesystem::remove(ntbl);
        std::filesystem::remove(out);
    }
}
