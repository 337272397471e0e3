#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tipflow/engine.hpp"

namespace tipflow {

/// Table-style throughput record for one scenario. total_messages counts
/// the processed units: messages at bulk 1, collections at bulk > 1.
struct BenchReport {
    std::string scenario;
    uint64_t total_messages = 0;
    double wall_time_seconds = 0;
    std::vector<uint64_t> per_second_samples;
    double mean_tps = 0;
    double ci99 = 0; // 99% confidence half-width over repetition means
    int threads = 1;
    size_t bulk_size = 1;
    double conversion_ms = 0;

    RunStats last_run;           // channel counts of the final repetition (not serialized)
    std::vector<double> rep_tps; // per-repetition rates behind mean_tps (not serialized)
};

enum class ConversionTarget { NativeObjects, FactTables };

/// Preloads the file (conversion measured separately, like the dedicated
/// conversion column), runs one unsampled warm-up pass over the first
/// max(1000, 5%) units, then `repetitions` timed passes. Per-second samples
/// come from the final pass.
BenchReport run_bench(const RouteDefinition& route, const std::filesystem::path& message_file,
                      int threads, size_t bulk_size, int repetitions,
                      const std::string& scenario_name = "");

/// Wall time to parse the whole file and materialize every record in the
/// chosen representation; no pattern evaluation.
double measure_conversion(const std::filesystem::path& file, ConversionTarget target,
                          const SchemaRegistry& schemas,
                          StreamFormat format = StreamFormat::Ndjson);

/// report.csv plus one "<second> <tps>" plot-data file per scenario.
void emit_report(const std::vector<BenchReport>& reports, const std::filesystem::path& dir);
std::vector<BenchReport> load_report_csv(const std::filesystem::path& csv);

} // namespace tipflow
