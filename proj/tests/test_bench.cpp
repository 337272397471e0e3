#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <numeric>

#include "tipflow/bench.hpp"
#include "tipflow/datagen.hpp"
#include "tipflow/errors.hpp"

using namespace tipflow;

namespace {

std::filesystem::path src_dir() {
    const char* env = std::getenv("TIPFLOW_SRC");
    return env ? std::filesystem::path(env) : std::filesystem::path("..");
}

std::filesystem::path tmp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("tipflow_bench_" + name);
}

std::filesystem::path order_file(uint64_t count, uint64_t seed) {
    auto f = tmp_path("orders_" + std::to_string(count) + "_" + std::to_string(seed) + ".ndjson");
    if (!std::filesystem::exists(f)) {
        GenSpec s;
        s.kind = GenKind::Orders;
        s.count = count;
        s.seed = seed;
        s.out = f;
        s.target_record_bytes = 512;
        gen_orders(s);
    }
    return f;
}

} // namespace

TEST_CASE("run_bench sample and count contracts") {
    RouteDefinition route = load_route_file(src_dir() / "routes/cbr_order.route.json");
    auto file = order_file(2000, 11);

    SUBCASE("samples sum to the processed units") {
        BenchReport r = run_bench(route, file, 1, 1, 1);
        CHECK(r.total_messages == 2000);
        CHECK(std::accumulate(r.per_second_samples.begin(), r.per_second_samples.end(),
                              uint64_t{0}) == r.total_messages);
        CHECK(r.mean_tps > 0);
        // meanTps equals units / wallTime
        CHECK(r.mean_tps == doctest::Approx(static_cast<double>(r.total_messages) /
                                            r.wall_time_seconds));
        CHECK(r.last_run.conserved());
        CHECK(r.ci99 == 0); // single repetition
    }
    SUBCASE("bulk runs count collections") {
        BenchReport r = run_bench(route, file, 1, 10, 1, "router-bulk10");
        CHECK(r.bulk_size == 10);
        CHECK(r.total_messages == 200);
        CHECK(std::accumulate(r.per_second_samples.begin(), r.per_second_samples.end(),
                              uint64_t{0}) == 200);
        CHECK(r.scenario == "router-bulk10");
        // partition routing preserves per-record conservation
        CHECK(r.last_run.conserved());
        CHECK(r.last_run.source_records == 2000);
    }
    SUBCASE("repetitions produce a confidence interval") {
        BenchReport r = run_bench(route, file, 1, 1, 3);
        CHECK(r.ci99 >= 0);
    }
}

TEST_CASE("measure_conversion") {
    auto file = order_file(3000, 12);
    SchemaRegistry reg = SchemaRegistry::builtin();

    SUBCASE("empty file converts in about no time") {
        auto f = tmp_path("none.ndjson");
        std::ofstream(f).close();
        CHECK(measure_conversion(f, ConversionTarget::FactTables, reg) < 50.0);
        std::filesystem::remove(f);
    }
    SUBCASE("repeat measurement is stable within 2x after warm-up") {
        measure_conversion(file, ConversionTarget::FactTables, reg); // warm the cache
        double first = measure_conversion(file, ConversionTarget::FactTables, reg);
        double second = measure_conversion(file, ConversionTarget::FactTables, reg);
        CHECK(second < 2.0 * first + 5.0);
        CHECK(first < 2.0 * second + 5.0);
    }
    SUBCASE("both representations produce comparable numbers") {
        double facts = measure_conversion(file, ConversionTarget::FactTables, reg);
        double native = measure_conversion(file, ConversionTarget::NativeObjects, reg);
        CHECK(facts > 0);
        CHECK(native > 0);
    }
    SUBCASE("customer files convert through both targets too") {
        auto f = tmp_path("cust.ndjson");
        GenSpec s;
        s.kind = GenKind::CustomerNation;
        s.count = 200;
        s.seed = 5;
        s.out = f;
        gen_customer_nation(s);
        CHECK(measure_conversion(f, ConversionTarget::FactTables, reg) > 0);
        CHECK(measure_conversion(f, ConversionTarget::NativeObjects, reg) > 0);
        std::filesystem::remove(f);
    }
}

TEST_CASE("emit_report") {
    RouteDefinition route = load_route_file(src_dir() / "routes/cbr_order.route.json");
    auto file = order_file(2000, 11);
    auto dir = tmp_path("reports");
    std::filesystem::remove_all(dir);

    SUBCASE("one report, one data row") {
        BenchReport r = run_bench(route, file, 1, 1, 1, "solo");
        emit_report({r}, dir);
        std::ifstream csv(dir / "report.csv");
        std::string header, row, extra;
        REQUIRE(std::getline(csv, header));
        CHECK(header ==
              "scenario,threads,bulkSize,totalMessages,wallTimeSeconds,meanTps,ci99,conversionMs");
        REQUIRE(std::getline(csv, row));
        CHECK(row.rfind("solo,1,1,2000,", 0) == 0);
        CHECK(!std::getline(csv, extra));
    }
    SUBCASE("three scenarios give three plot series") {
        BenchReport a = run_bench(route, file, 1, 1, 1, "s-one");
        BenchReport b = run_bench(route, file, 1, 10, 1, "s-two");
        BenchReport c = run_bench(route, file, 1, 100, 1, "s-three");
        emit_report({a, b, c}, dir);
        CHECK(std::filesystem::exists(dir / "s_one.plot"));
        CHECK(std::filesystem::exists(dir / "s_two.plot"));
        CHECK(std::filesystem::exists(dir / "s_three.plot"));
        // plot rows are "second tps" pairs
        std::ifstream plot(dir / "s_one.plot");
        size_t second, tps_sum = 0, count = 0;
        uint64_t tps;
        while (plot >> second >> tps) {
            ++count;
            CHECK(second == count);
            tps_sum += tps;
        }
        CHECK(tps_sum == a.total_messages);
    }
    SUBCASE("reloading the csv reproduces the stats") {
        BenchReport r = run_bench(route, file, 1, 1, 2, "round");
        emit_report({r}, dir);
        auto loaded = load_report_csv(dir / "report.csv");
        REQUIRE(loaded.size() == 1);
        CHECK(loaded[0].scenario == "round");
        CHECK(loaded[0].mean_tps == doctest::Approx(r.mean_tps).epsilon(1e-9));
        CHECK(loaded[0].ci99 == doctest::Approx(r.ci99).epsilon(1e-9));
        CHECK(loaded[0].total_messages == r.total_messages);
        // derived wall time stays consistent with the mean rate
        CHECK(loaded[0].mean_tps ==
              doctest::Approx(static_cast<double>(loaded[0].total_messages) /
                              loaded[0].wall_time_seconds));
    }
    std::filesystem::remove_all(dir);
}
