#include "tipflow/bench.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <sstream>
#include <thread>

#include "tipflow/baseline.hpp"
#include "tipflow/errors.hpp"

namespace tipflow {

using Clock = std::chrono::steady_clock;

namespace {

// two-sided 99% Student-t quantiles by degrees of freedom
double t99(int df) {
    static const double table[] = {63.657, 9.925, 5.841, 4.604, 4.032, 3.707, 3.499, 3.355,
                                   3.250,  3.169, 3.106, 3.055, 3.012, 2.977, 2.947, 2.921,
                                   2.898,  2.878, 2.861, 2.845, 2.831, 2.819, 2.807, 2.797,
                                   2.787,  2.779, 2.771, 2.763, 2.756, 2.750};
    if (df < 1) return 0;
    if (df <= 30) return table[df - 1];
    return 2.576;
}

std::string sanitize(const std::string& name) {
    std::string out;
    for (char c : name)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

std::string fmt_double(double v) {
    std::ostringstream ss;
    ss.precision(12);
    ss << v;
    return ss.str();
}

} // namespace

BenchReport run_bench(const RouteDefinition& route, const std::filesystem::path& message_file,
                      int threads, size_t bulk_size, int repetitions,
                      const std::string& scenario_name) {
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (bulk_size < 1) throw ConfigError("bulk size must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");

    // materialize outside the measured window; the conversion cost is its
    // own column
    std::vector<Message> messages;
    {
        FileMessageSource file_src(message_file, route.schemas, route.source.format);
        if (bulk_size > 1) {
            BulkingSource bulk_src(file_src, bulk_size);
            while (auto m = bulk_src.next()) messages.push_back(std::move(*m));
        } else {
            while (auto m = file_src.next()) messages.push_back(std::move(*m));
        }
    }

    BenchReport report;
    report.scenario = scenario_name.empty() ? route.name : scenario_name;
    report.total_messages = messages.size();
    report.threads = threads;
    report.bulk_size = bulk_size;

    if (!messages.empty()) {
        // warm-up pass, excluded from every sample
        size_t warm = std::min(messages.size(), std::max<size_t>(1000, messages.size() / 20));
        std::vector<Message> warm_slice(messages.begin(),
                                        messages.begin() + static_cast<ptrdiff_t>(warm));
        run_preloaded(route, warm_slice, threads);

        std::vector<double> rep_tps;
        for (int r = 0; r < repetitions; ++r) {
            std::atomic<uint64_t> progress{0};
            std::vector<uint64_t> samples;
            std::mutex mtx;
            std::condition_variable cv;
            bool done = false;
            std::thread sampler([&] {
                std::unique_lock<std::mutex> lock(mtx);
                uint64_t prev = 0;
                while (!cv.wait_for(lock, std::chrono::seconds(1), [&] { return done; })) {
                    uint64_t cur = progress.load(std::memory_order_relaxed);
                    samples.push_back(cur - prev);
                    prev = cur;
                }
                uint64_t cur = progress.load(std::memory_order_relaxed);
                if (cur > prev || samples.empty()) samples.push_back(cur - prev);
            });

            auto t0 = Clock::now();
            RunStats stats = run_preloaded(route, messages, threads, &progress);
            double wall = std::chrono::duration<double>(Clock::now() - t0).count();
            {
                std::lock_guard<std::mutex> lock(mtx);
                done = true;
            }
            cv.notify_all();
            sampler.join();

            rep_tps.push_back(static_cast<double>(messages.size()) / std::max(wall, 1e-9));
            if (r == repetitions - 1) {
                report.per_second_samples = std::move(samples);
                report.last_run = std::move(stats);
            }
        }

        double sum = 0;
        for (double v : rep_tps) sum += v;
        report.mean_tps = sum / static_cast<double>(rep_tps.size());
        report.rep_tps = rep_tps;
        // derived so that meanTps == units / wallTime holds exactly
        report.wall_time_seconds = static_cast<double>(messages.size()) / report.mean_tps;
        if (rep_tps.size() >= 2) {
            double var = 0;
            for (double v : rep_tps) var += (v - report.mean_tps) * (v - report.mean_tps);
            var /= static_cast<double>(rep_tps.size() - 1);
            report.ci99 = t99(static_cast<int>(rep_tps.size()) - 1) * std::sqrt(var) /
                          std::sqrt(static_cast<double>(rep_tps.size()));
        }
    }

    report.conversion_ms =
        measure_conversion(message_file, ConversionTarget::FactTables, route.schemas,
                           route.source.format);
    return report;
}

double measure_conversion(const std::filesystem::path& file, ConversionTarget target,
                          const SchemaRegistry& schemas, StreamFormat format) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open message file: " + file.string());

    auto t0 = Clock::now();
    size_t sink = 0; // keeps the materialized values alive past the loop
    if (target == ConversionTarget::FactTables) {
        MessageStream stream(in, schemas, format);
        while (auto msg = stream.next()) sink += msg->body.total_tuples();
    } else {
        RecordChunker chunker(in, format);
        while (auto chunk = chunker.next()) {
            try {
                nlohmann::json rec = nlohmann::json::parse(*chunk);
                std::string type = rec.value("objecttype", "");
                if (type == "order") {
                    OrderNative o = order_from_json(rec);
                    sink += o.opriority.size();
                } else if (type == "customer") {
                    CustomerNationNative c = customer_from_json(rec);
                    sink += c.nations.size() + 1;
                } else {
                    sink += rec.size();
                }
            } catch (const std::exception&) {
                // skip malformed records, same policy as the fact path
            }
        }
    }
    double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    return sink == SIZE_MAX ? -1 : ms; // sink is always consumed
}

void emit_report(const std::vector<BenchReport>& reports, const std::filesystem::path& dir) {
    if (reports.empty()) throw ConfigError("emit_report: no reports");
    std::filesystem::create_directories(dir);

    std::ofstream csv(dir / "report.csv");
    if (!csv) throw IoError("cannot write report.csv under " + dir.string());
    csv << "scenario,threads,bulkSize,totalMessages,wallTimeSeconds,meanTps,ci99,conversionMs\n";
    for (const auto& r : reports) {
        csv << r.scenario << ',' << r.threads << ',' << r.bulk_size << ',' << r.total_messages
            << ',' << fmt_double(r.wall_time_seconds) << ',' << fmt_double(r.mean_tps) << ','
            << fmt_double(r.ci99) << ',' << fmt_double(r.conversion_ms) << '\n';
    }
    csv.close();
    if (!csv) throw IoError("write failed: report.csv");

    for (const auto& r : reports) {
        std::ofstream plot(dir / (sanitize(r.scenario) + ".plot"));
        if (!plot) throw IoError("cannot write plot data under " + dir.string());
        for (size_t s = 0; s < r.per_second_samples.size(); ++s)
            plot << (s + 1) << ' ' << r.per_second_samples[s] << '\n';
    }
}

std::vector<BenchReport> load_report_csv(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open " + csv_path.string());
    std::vector<BenchReport> out;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        if (cols.size() != 8) throw IoError("report.csv: expected 8 columns");
        BenchReport r;
        r.scenario = cols[0];
        r.threads = std::stoi(cols[1]);
        r.bulk_size = std::stoull(cols[2]);
        r.total_messages = std::stoull(cols[3]);
        r.wall_time_seconds = std::stod(cols[4]);
        r.mean_tps = std::stod(cols[5]);
        r.ci99 = std::stod(cols[6]);
        r.conversion_ms = std::stod(cols[7]);
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace tipflow
