#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "tipflow/json_io.hpp"

namespace tipflow {

enum class GenKind { Orders, CustomerNation };

/// Same (kind, count, seed) always produces byte-identical output.
struct GenSpec {
    GenKind kind = GenKind::Orders;
    uint64_t count = 0;
    uint64_t seed = 1;
    std::filesystem::path out;
    StreamFormat format = StreamFormat::Ndjson;
    /// Serialized order records are padded to roughly this many bytes.
    size_t target_record_bytes = 4096;
};

struct NationRow {
    int64_t key;
    const char* name;
    int64_t region;
};

/// The fixed 25-row nation table (5 regions; region 3 is Europe).
const std::array<NationRow, 25>& nation_table();

void gen_orders(const GenSpec& spec);
void gen_customer_nation(const GenSpec& spec);
void generate(const GenSpec& spec);

/// In-memory record builders (also used by generator-backed sources).
/// State advances one record per call; construction is cheap.
class OrderGenerator {
public:
    explicit OrderGenerator(uint64_t seed, size_t target_record_bytes = 4096);
    /// Serialized JSON object for record `index`; must be called with
    /// consecutive indexes starting at 0.
    std::string next_line();

private:
    uint64_t state_;
    uint64_t index_ = 0;
    size_t target_bytes_;
};

class CustomerNationGenerator {
public:
    explicit CustomerNationGenerator(uint64_t seed);
    std::string next_line();

private:
    uint64_t state_;
    uint64_t index_ = 0;
};

/// TPC-H dbgen import: pipe-delimited .tbl files rendered into the same
/// message record format the generator emits.
void import_orders_tbl(const std::filesystem::path& tbl, const std::filesystem::path& out,
                       StreamFormat format = StreamFormat::Ndjson, size_t target_record_bytes = 4096);
void import_customer_nation_tbl(const std::filesystem::path& customer_tbl,
                                const std::filesystem::path& nation_tbl,
                                const std::filesystem::path& out,
                                StreamFormat format = StreamFormat::Ndjson);

} // namespace tipflow
