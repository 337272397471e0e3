#include <algorithm>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "tipflow/baseline.hpp"
#include "tipflow/bench.hpp"
#include "tipflow/datagen.hpp"
#include "tipflow/engine.hpp"
#include "tipflow/errors.hpp"
#include "tipflow/parser.hpp"
#include "tipflow/route.hpp"

using namespace tipflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void print_stats(const RunStats& s) {
    std::cout << "source: " << s.source_messages << " messages, " << s.source_records
              << " records";
    if (s.source_skipped) std::cout << ", " << s.source_skipped << " skipped";
    std::cout << "\n";
    for (const auto& [name, m] : s.messages_per_channel) {
        auto r = s.records_per_channel.count(name) ? s.records_per_channel.at(name) : 0;
        std::cout << "channel " << name << ": " << m << " messages, " << r << " records\n";
    }
    std::cout << "filtered: " << s.filtered_records << " records, errors: " << s.error_records
              << " records\n";
    double tps = s.wall_seconds > 0 ? static_cast<double>(s.source_messages) / s.wall_seconds : 0;
    std::cout << "wall: " << s.wall_seconds << " s, " << static_cast<uint64_t>(tps)
              << " msg/s\n";
    std::cout << "peak memory: " << s.peak_rss_kb << " kB\n";
    std::cout << "conserved: " << (s.conserved() ? "yes" : "NO") << "\n";
}

std::unique_ptr<MessageSource> make_source(const RouteDefinition& route,
                                           const std::string& in_file,
                                           const std::string& format_flag) {
    StreamFormat format = route.source.format;
    if (!format_flag.empty())
        format = format_flag == "json" ? StreamFormat::JsonArray : StreamFormat::Ndjson;
    if (!in_file.empty())
        return std::make_unique<FileMessageSource>(in_file, route.schemas, format);
    switch (route.source.kind) {
        case Endpoint::Kind::FileSource:
            if (route.source.path.empty())
                throw ConfigError("route has a file source without a path; pass --in");
            return std::make_unique<FileMessageSource>(route.source.path, route.schemas, format);
        case Endpoint::Kind::GeneratorSource:
            return std::make_unique<GeneratorMessageSource>(*route.source.gen, route.schemas);
        default:
            throw ConfigError("route source endpoint cannot produce messages; pass --in");
    }
}

int cmd_gen(const std::string& kind, uint64_t count, uint64_t seed, const std::string& out,
            const std::string& format, size_t record_bytes, const std::string& from_tbl,
            const std::string& nation_tbl) {
    StreamFormat fmt = format == "json" ? StreamFormat::JsonArray : StreamFormat::Ndjson;
    if (!from_tbl.empty()) {
        if (kind == "orders") import_orders_tbl(from_tbl, out, fmt, record_bytes);
        else import_customer_nation_tbl(from_tbl, nation_tbl, out, fmt);
        return kExitOk;
    }
    GenSpec spec;
    spec.kind = kind == "orders" ? GenKind::Orders : GenKind::CustomerNation;
    spec.count = count;
    spec.seed = seed;
    spec.out = out;
    spec.format = fmt;
    spec.target_record_bytes = record_bytes;
    generate(spec);
    return kExitOk;
}

int cmd_eval(const std::string& program_path, const std::string& facts_path,
             const std::string& goal) {
    auto program = datalog::parse_program_file(program_path);
    Database db = facts_path.empty() ? Database{} : datalog::parse_facts_file(facts_path);
    Database out = datalog::evaluate(*program, db);
    const Relation* rel = out.find(goal);
    std::vector<std::string> lines;
    if (rel) {
        for (const Tuple& t : *rel) {
            std::string line;
            for (size_t i = 0; i < t.size(); ++i) {
                if (i) line += '\t';
                line += t[i].to_text();
            }
            lines.push_back(std::move(line));
        }
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& l : lines) std::cout << l << "\n";
    return kExitOk;
}

int cmd_run(const std::string& route_path, const std::string& in_file, int threads, size_t bulk,
            const std::string& format_flag) {
    RouteDefinition route = load_route_file(route_path);
    auto source = make_source(route, in_file, format_flag);
    RunOptions opts;
    opts.threads = threads;
    RunStats stats;
    if (bulk > 1) {
        BulkingSource bulk_source(*source, bulk);
        stats = run(route, bulk_source, opts);
    } else {
        stats = run(route, *source, opts);
    }
    print_stats(stats);
    return kExitOk;
}

int cmd_bench(const std::string& route_path, const std::string& in_file, int threads, size_t bulk,
              int reps, const std::string& report_dir, const std::string& scenario) {
    RouteDefinition route = load_route_file(route_path);
    std::string in = in_file;
    if (in.empty()) {
        if (route.source.kind != Endpoint::Kind::FileSource || route.source.path.empty())
            throw ConfigError("bench needs --in or a file source in the route");
        in = route.source.path.string();
    }
    BenchReport report = run_bench(route, in, threads, bulk, reps, scenario);
    if (!report.last_run.conserved())
        throw Error("bench run broke message conservation");
    emit_report({report}, report_dir);
    std::cout << "scenario " << report.scenario << ": " << report.total_messages << " units, "
              << report.mean_tps << " tps (+/- " << report.ci99 << "), wall "
              << report.wall_time_seconds << " s, conversion " << report.conversion_ms
              << " ms\nreport: " << (std::filesystem::path(report_dir) / "report.csv").string()
              << "\n";
    return kExitOk;
}

enum class VerifyKind { RouterOrder, TranslatorOrder, JoinCustomer };

int cmd_verify(const std::string& route_path, const std::string& in_file,
               const std::string& baseline_flag) {
    RouteDefinition route = load_route_file(route_path);

    VerifyKind kind;
    if (baseline_flag == "router-order") kind = VerifyKind::RouterOrder;
    else if (baseline_flag == "translator-order") kind = VerifyKind::TranslatorOrder;
    else if (baseline_flag == "join-customer") kind = VerifyKind::JoinCustomer;
    else {
        // infer from the first pattern node
        const PatternNode* n = route.nodes.empty() ? nullptr : &route.nodes.front();
        if (!n) throw ConfigError("verify: route has no nodes");
        if (n->kind == NodeKind::Translator || n->kind == NodeKind::BaselineTranslator) {
            kind = VerifyKind::TranslatorOrder;
        } else if (n->kind == NodeKind::Router || n->kind == NodeKind::BaselineRouter) {
            bool joins = false;
            for (const auto& c : n->conditions)
                if (c.program->body_relations().count("customer")) joins = true;
            if (n->kind == NodeKind::BaselineRouter && n->variant == "customer-join") joins = true;
            kind = joins ? VerifyKind::JoinCustomer : VerifyKind::RouterOrder;
        } else {
            throw ConfigError("verify: cannot infer a baseline for node kind; pass --baseline");
        }
    }

    // TIP side configuration comes from the route's router/translator node
    std::vector<RoutingCondition> conds;
    ChannelTable table;
    datalog::ProgramPtr mt;
    std::string mt_goal;
    for (const auto& n : route.nodes) {
        if (n.kind == NodeKind::Router && conds.empty()) {
            for (const auto& c : n.conditions) {
                conds.push_back(RoutingCondition{c.program, c.goal});
                table.channels.push_back(c.channel);
            }
            table.default_channel = n.default_channel.empty() ? kDeadChannel : n.default_channel;
        }
        if (n.kind == NodeKind::Translator && !mt) {
            mt = n.program;
            mt_goal = n.goal;
        }
    }
    if (kind != VerifyKind::TranslatorOrder && conds.empty())
        throw ConfigError("verify: route has no router node");
    if (kind == VerifyKind::TranslatorOrder && !mt)
        throw ConfigError("verify: route has no translator node");

    auto source = make_source(route, in_file, "");
    uint64_t checked = 0;
    while (auto msg = source->next()) {
        ++checked;
        if (kind == VerifyKind::TranslatorOrder) {
            Message tip = message_translator(*msg, *mt, mt_goal);
            Message native = baseline_translator(*msg);
            auto facts = [](const Message& m) {
                std::map<std::string, std::set<Tuple, datalog::TupleLess>> out;
                for (const auto& [name, rel] : m.body) {
                    auto& s = out[name];
                    for (const Tuple& t : *rel) s.insert(t);
                }
                return out;
            };
            if (facts(tip) != facts(native)) {
                std::cout << "DIVERGENCE at record " << msg->id << ": translated bodies differ\n";
                return kExitRuntime;
            }
        } else {
            auto [tip_channel, m1] = content_based_router(*msg, conds, table);
            auto [native_channel, m2] = kind == VerifyKind::RouterOrder
                                            ? baseline_router(*msg, table)
                                            : baseline_join_router(*msg, table);
            if (tip_channel != native_channel) {
                std::cout << "DIVERGENCE at record " << msg->id << ": tip=" << tip_channel
                          << " baseline=" << native_channel << "\n";
                return kExitRuntime;
            }
        }
    }
    std::cout << "verified " << checked << " messages, 0 divergences\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Table-centric integration pattern engine"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate or import message files");
    std::string gen_kind = "orders", gen_out, gen_format = "ndjson", gen_from_tbl, gen_nation_tbl;
    uint64_t gen_count = 0, gen_seed = 1;
    size_t gen_record_bytes = 4096;
    gen->add_option("--kind", gen_kind)->check(CLI::IsMember({"orders", "customer-nation"}));
    gen->add_option("--count", gen_count)->check(CLI::NonNegativeNumber);
    gen->add_option("--seed", gen_seed);
    gen->add_option("--out", gen_out)->required();
    gen->add_option("--format", gen_format)->check(CLI::IsMember({"ndjson", "json"}));
    gen->add_option("--record-bytes", gen_record_bytes);
    gen->add_option("--from-tbl", gen_from_tbl);
    gen->add_option("--nation-tbl", gen_nation_tbl);

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a Datalog program over a fact file");
    std::string eval_program, eval_facts, eval_goal;
    eval->add_option("--program", eval_program)->required();
    eval->add_option("--facts", eval_facts);
    eval->add_option("--goal", eval_goal)->required();

    // shared run/bench/verify flags
    std::string route_path, in_file, format_flag, scenario;
    int threads = 0, reps = 1;
    size_t bulk = 1;
    const char* env_report = std::getenv("TIPFLOW_REPORT_DIR");
    std::string report_dir = env_report ? env_report : "reports";
    std::string baseline_flag = "auto";

    auto* run_cmd = app.add_subcommand("run", "Run a message file through a route");
    run_cmd->add_option("--route", route_path)->required();
    run_cmd->add_option("--in", in_file);
    run_cmd->add_option("--threads", threads);
    run_cmd->add_option("--bulk", bulk)->check(CLI::PositiveNumber);
    run_cmd->add_option("--format", format_flag)->check(CLI::IsMember({"ndjson", "json"}));

    auto* bench_cmd = app.add_subcommand("bench", "Measure route throughput");
    bench_cmd->add_option("--route", route_path)->required();
    bench_cmd->add_option("--in", in_file);
    bench_cmd->add_option("--threads", threads);
    bench_cmd->add_option("--bulk", bulk)->check(CLI::PositiveNumber);
    bench_cmd->add_option("--reps", reps)->check(CLI::PositiveNumber);
    bench_cmd->add_option("--report-dir", report_dir);
    bench_cmd->add_option("--scenario", scenario);

    auto* verify_cmd = app.add_subcommand("verify", "Compare TIP decisions against the native baseline");
    verify_cmd->add_option("--route", route_path)->required();
    verify_cmd->add_option("--in", in_file);
    verify_cmd->add_option("--baseline", baseline_flag)
        ->check(CLI::IsMember({"auto", "router-order", "translator-order", "join-customer"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed())
            return cmd_gen(gen_kind, gen_count, gen_seed, gen_out, gen_format, gen_record_bytes,
                           gen_from_tbl, gen_nation_tbl);
        if (eval->parsed()) return cmd_eval(eval_program, eval_facts, eval_goal);
        if (run_cmd->parsed()) return cmd_run(route_path, in_file, threads, bulk, format_flag);
        if (bench_cmd->parsed())
            return cmd_bench(route_path, in_file, threads < 1 ? 1 : threads, bulk, reps,
                             report_dir, scenario);
        if (verify_cmd->parsed())
            return cmd_verify(route_path, in_file, baseline_flag == "auto" ? "" : baseline_flag);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
