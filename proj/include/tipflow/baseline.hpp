#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tipflow/message.hpp"
#include "tipflow/patterns.hpp"

namespace tipflow {

/// Hand-coded counterparts of the shipped routing and translation
/// programs: direct positional field access, native comparisons, early
/// exit on the first failed conjunct. Decisions and outputs must be
/// indistinguishable from the Datalog-evaluated versions.

/// Urgent-and-costly order routing (priority equality, then total price
/// threshold). First channel on match, default otherwise.
std::pair<std::string, Message> baseline_router(const Message& msg, const ChannelTable& channels);

/// Order projection to the 5-field target format (keys + ship priority).
Message baseline_translator(const Message& msg);

/// Customer balance threshold joined with the nation table on nation key,
/// region must be Europe. First channel on match, default otherwise.
std::pair<std::string, Message> baseline_join_router(const Message& msg,
                                                     const ChannelTable& channels);

// --- native object representation (format-conversion target) ---

struct OrderNative {
    std::string id;
    std::string objecttype;
    int64_t orderkey = 0;
    int64_t custkey = 0;
    double ototalprice = 0;
    std::string opriority;
    int64_t shippriority = 0;
};

struct NationNative {
    int64_t nationkey = 0;
    std::string nname;
    int64_t nregionkey = 0;
};

struct CustomerNationNative {
    std::string id;
    std::string objecttype;
    int64_t custkey = 0;
    std::string name;
    int64_t cnationkey = 0;
    std::string phone;
    double acctbal = 0;
    std::string mktsegment;
    std::vector<NationNative> nations;
};

OrderNative order_from_json(const nlohmann::json& rec);
CustomerNationNative customer_from_json(const nlohmann::json& rec);

} // namespace tipflow
