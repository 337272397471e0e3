#include "tipflow/datagen.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "tipflow/errors.hpp"

namespace tipflow {

namespace {

// splitmix64: tiny, fully specified, platform-independent
uint64_t next_u64(uint64_t& s) {
    s += 0x9E3779B97F4A7C15ULL;
    uint64_t z = s;
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

uint64_t bounded(uint64_t& s, uint64_t n) { return next_u64(s) % n; }

const char* kPriorities[5] = {"1-URGENT", "2-HIGH", "3-MEDIUM", "4-NOT SPECIFIED", "5-LOW"};
const char* kSegments[5] = {"AUTOMOBILE", "BUILDING", "FURNITURE", "MACHINERY", "HOUSEHOLD"};

/// Fixed-point cents rendered with two decimals, exact.
std::string cents_to_string(int64_t cents) {
    bool neg = cents < 0;
    uint64_t a = neg ? static_cast<uint64_t>(-cents) : static_cast<uint64_t>(cents);
    char buf[40];
    snprintf(buf, sizeof buf, "%s%" PRIu64 ".%02u", neg ? "-" : "", a / 100,
             static_cast<unsigned>(a % 100));
    return buf;
}

std::string json_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

class LineWriter {
public:
    LineWriter(const std::filesystem::path& path, StreamFormat format)
        : out_(path, std::ios::binary), format_(format) {
        if (!out_) throw IoError("cannot open output file: " + path.string());
        buffer_.reserve(1 << 20);
        if (format_ == StreamFormat::JsonArray) buffer_ += "[";
    }

    void write(std::string_view line) {
        if (format_ == StreamFormat::JsonArray) {
            buffer_ += first_ ? "\n" : ",\n";
            first_ = false;
            buffer_ += line;
        } else {
            buffer_ += line;
            buffer_ += '\n';
        }
        if (buffer_.size() > (1 << 20) - 8192) flush();
    }

    void finish() {
        if (format_ == StreamFormat::JsonArray) buffer_ += "\n]\n";
        flush();
        out_.close();
        if (!out_) throw IoError("write failed");
    }

private:
    void flush() {
        out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
        buffer_.clear();
    }

    std::ofstream out_;
    StreamFormat format_;
    std::string buffer_;
    bool first_ = true;
};

std::string order_line(uint64_t index, uint64_t& state, size_t target_bytes) {
    uint64_t orderkey = index + 1;
    uint64_t custkey = 1 + bounded(state, 150000);
    // [1000.00, 500000.00] in cents, so the shipped price threshold splits it
    int64_t cents = 100000 + static_cast<int64_t>(bounded(state, 50000000 - 100000 + 1));
    const char* prio = kPriorities[bounded(state, 5)];

    std::string line;
    line.reserve(target_bytes + 32);
    line += "{\"id\":\"o";
    line += std::to_string(orderkey);
    line += "\",\"objecttype\":\"order\",\"ORDERKEY\":";
    line += std::to_string(orderkey);
    line += ",\"CUSTKEY\":";
    line += std::to_string(custkey);
    line += ",\"OTOTALPRICE\":";
    line += cents_to_string(cents);
    line += ",\"OPRIORITY\":\"";
    line += prio;
    line += "\",\"SHIPPRIORITY\":0,\"padding\":\"";
    size_t close = 2; // "}  -> quote + brace
    size_t pad = line.size() + close < target_bytes ? target_bytes - line.size() - close : 0;
    line.append(pad, 'x');
    line += "\"}";
    return line;
}

std::string nation_context_json(const std::string& id) {
    std::string ctx = "[";
    const auto& nations = nation_table();
    for (size_t i = 0; i < nations.size(); ++i) {
        if (i) ctx += ",";
        ctx += "{\"id\":\"" + id + "\",\"objecttype\":\"nation\",\"NATIONKEY\":" +
               std::to_string(nations[i].key) + ",\"NNAME\":\"" + nations[i].name +
               "\",\"NREGIONKEY\":" + std::to_string(nations[i].region) + ",\"NCOMMENT\":\"\"}";
    }
    ctx += "]";
    return ctx;
}

std::string customer_line(uint64_t index, uint64_t& state) {
    uint64_t custkey = index + 1;
    uint64_t nationkey = bounded(state, 25);
    // TPC-H account balance span [-999.99, 9999.99]
    int64_t cents = -99999 + static_cast<int64_t>(bounded(state, 999999 - (-99999) + 1));
    const char* segment = kSegments[bounded(state, 5)];
    char name[32], phone[32];
    snprintf(name, sizeof name, "Customer#%09" PRIu64, custkey);
    snprintf(phone, sizeof phone, "%02u-%03u-%03u-%04u", static_cast<unsigned>(10 + nationkey),
             static_cast<unsigned>(100 + bounded(state, 900)),
             static_cast<unsigned>(100 + bounded(state, 900)),
             static_cast<unsigned>(1000 + bounded(state, 9000)));

    std::string id = "c" + std::to_string(custkey);
    std::string line;
    line.reserve(3400);
    line += "{\"id\":\"" + id + "\",\"objecttype\":\"customer\",\"CUSTKEY\":";
    line += std::to_string(custkey);
    line += ",\"NAME\":\"";
    line += name;
    line += "\",\"CNATIONKEY\":";
    line += std::to_string(nationkey);
    line += ",\"PHONE\":\"";
    line += phone;
    line += "\",\"ACCTBAL\":";
    line += cents_to_string(cents);
    line += ",\"MKTSEGMENT\":\"";
    line += segment;
    line += "\",\"context\":";
    line += nation_context_json(id);
    line += "}";
    return line;
}

} // namespace

const std::array<NationRow, 25>& nation_table() {
    static const std::array<NationRow, 25> table = {{
        {0, "ALGERIA", 0},       {1, "ARGENTINA", 1}, {2, "BRAZIL", 1},
        {3, "CANADA", 1},        {4, "EGYPT", 4},     {5, "ETHIOPIA", 0},
        {6, "FRANCE", 3},        {7, "GERMANY", 3},   {8, "INDIA", 2},
        {9, "INDONESIA", 2},     {10, "IRAN", 4},     {11, "IRAQ", 4},
        {12, "JAPAN", 2},        {13, "JORDAN", 4},   {14, "KENYA", 0},
        {15, "MOROCCO", 0},      {16, "MOZAMBIQUE", 0}, {17, "PERU", 1},
        {18, "CHINA", 2},        {19, "ROMANIA", 3},  {20, "SAUDI ARABIA", 4},
        {21, "VIETNAM", 2},      {22, "RUSSIA", 3},   {23, "UNITED KINGDOM", 3},
        {24, "UNITED STATES", 1},
    }};
    return table;
}

OrderGenerator::OrderGenerator(uint64_t seed, size_t target_record_bytes)
    : state_(seed), target_bytes_(target_record_bytes) {}

std::string OrderGenerator::next_line() { return order_line(index_++, state_, target_bytes_); }

CustomerNationGenerator::CustomerNationGenerator(uint64_t seed) : state_(seed) {}

std::string CustomerNationGenerator::next_line() { return customer_line(index_++, state_); }

void gen_orders(const GenSpec& spec) {
    LineWriter out(spec.out, spec.format);
    OrderGenerator gen(spec.seed, spec.target_record_bytes);
    for (uint64_t i = 0; i < spec.count; ++i) out.write(gen.next_line());
    out.finish();
}

void gen_customer_nation(const GenSpec& spec) {
    LineWriter out(spec.out, spec.format);
    CustomerNationGenerator gen(spec.seed);
    for (uint64_t i = 0; i < spec.count; ++i) out.write(gen.next_line());
    out.finish();
}

void generate(const GenSpec& spec) {
    if (spec.kind == GenKind::Orders) gen_orders(spec);
    else gen_customer_nation(spec);
}

namespace {

std::vector<std::string> split_pipes(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= line.size()) {
        size_t end = line.find('|', start);
        if (end == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

} // namespace

void import_orders_tbl(const std::filesystem::path& tbl, const std::filesystem::path& out_path,
                       StreamFormat format, size_t target_record_bytes) {
    std::ifstream in(tbl);
    if (!in) throw IoError("cannot open " + tbl.string());
    LineWriter out(out_path, format);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_pipes(line);
        // O_ORDERKEY|O_CUSTKEY|O_ORDERSTATUS|O_TOTALPRICE|O_ORDERDATE|O_ORDERPRIORITY|O_CLERK|O_SHIPPRIORITY|...
        if (f.size() < 8) throw IoError("orders.tbl: expected >=8 pipe-delimited columns");
        std::string rec = "{\"id\":\"o" + f[0] + "\",\"objecttype\":\"order\",\"ORDERKEY\":" + f[0] +
                          ",\"CUSTKEY\":" + f[1] + ",\"OTOTALPRICE\":" + f[3] + ",\"OPRIORITY\":\"" +
                          json_escape(f[5]) + "\",\"SHIPPRIORITY\":" + f[7] + ",\"padding\":\"";
        size_t pad = rec.size() + 2 < target_record_bytes ? target_record_bytes - rec.size() - 2 : 0;
        rec.append(pad, 'x');
        rec += "\"}";
        out.write(rec);
    }
    out.finish();
}

void import_customer_nation_tbl(const std::filesystem::path& customer_tbl,
                                const std::filesystem::path& nation_tbl,
                                const std::filesystem::path& out_path, StreamFormat format) {
    // nation table: from the .tbl when given, builtin otherwise
    struct Nat {
        std::string key, name, region;
    };
    std::vector<Nat> nations;
    if (!nation_tbl.empty()) {
        std::ifstream nin(nation_tbl);
        if (!nin) throw IoError("cannot open " + nation_tbl.string());
        std::string line;
        while (std::getline(nin, line)) {
            if (line.empty()) continue;
            auto f = split_pipes(line);
            if (f.size() < 3) throw IoError("nation.tbl: expected >=3 pipe-delimited columns");
            nations.push_back({f[0], json_escape(f[1]), f[2]});
        }
    } else {
        for (const auto& n : nation_table())
            nations.push_back({std::to_string(n.key), n.name, std::to_string(n.region)});
    }

    std::ifstream in(customer_tbl);
    if (!in) throw IoError("cannot open " + customer_tbl.string());
    LineWriter out(out_path, format);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_pipes(line);
        // C_CUSTKEY|C_NAME|C_ADDRESS|C_NATIONKEY|C_PHONE|C_ACCTBAL|C_MKTSEGMENT|...
        if (f.size() < 7) throw IoError("customer.tbl: expected >=7 pipe-delimited columns");
        std::string id = "c" + f[0];
        std::string rec = "{\"id\":\"" + id + "\",\"objecttype\":\"customer\",\"CUSTKEY\":" + f[0] +
                          ",\"NAME\":\"" + json_escape(f[1]) + "\",\"CNATIONKEY\":" + f[3] +
                          ",\"PHONE\":\"" + json_escape(f[4]) + "\",\"ACCTBAL\":" + f[5] +
                          ",\"MKTSEGMENT\":\"" + json_escape(f[6]) + "\",\"context\":[";
        for (size_t i = 0; i < nations.size(); ++i) {
            if (i) rec += ",";
            rec += "{\"id\":\"" + id + "\",\"objecttype\":\"nation\",\"NATIONKEY\":" + nations[i].key +
                   ",\"NNAME\":\"" + nations[i].name + "\",\"NREGIONKEY\":" + nations[i].region +
                   ",\"NCOMMENT\":\"\"}";
        }
        rec += "]}";
        out.write(rec);
    }
    out.finish();
}

} // namespace tipflow
