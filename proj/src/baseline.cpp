#include "tipflow/baseline.hpp"

#include "tipflow/errors.hpp"

namespace tipflow {

namespace {

const Relation& need_relation(const Message& msg, const char* name, size_t arity) {
    const Relation* rel = msg.body.find(name);
    if (!rel || rel->arity() != arity) throw MissingField(name);
    return *rel;
}

const std::string& str_at(const Tuple& t, size_t i, const char* field) {
    if (!t[i].is_str()) throw MissingField(field);
    return t[i].str();
}

double num_at(const Tuple& t, size_t i, const char* field) {
    if (!t[i].is_numeric()) throw MissingField(field);
    return t[i].numeric();
}

} // namespace

std::pair<std::string, Message> baseline_router(const Message& msg, const ChannelTable& channels) {
    const Relation& orders = need_relation(msg, "order", 7);
    for (const Tuple& t : orders) {
        if (str_at(t, 5, "OPRIORITY") != "1-URGENT") continue; // early exit per conjunct
        if (num_at(t, 4, "OTOTALPRICE") > 100000.00)
            return {channels.channels.empty() ? channels.default_channel : channels.channels[0], msg};
    }
    return {channels.default_channel, msg};
}

Message baseline_translator(const Message& msg) {
    const Relation& orders = need_relation(msg, "order", 7);
    Relation conv("conv-order", 5);
    for (const Tuple& t : orders)
        conv.insert({t[0], t[1], t[2], t[3], t[6]});
    Message out;
    out.id = msg.id;
    out.header = msg.header;
    out.attachments = msg.attachments;
    out.support_rules = msg.support_rules;
    out.body.put(std::move(conv));
    for (const auto& [name, rel] : msg.body)
        if (name != "order" && name != "conv-order") out.body.put(rel);
    return out;
}

std::pair<std::string, Message> baseline_join_router(const Message& msg,
                                                     const ChannelTable& channels) {
    const Relation& customers = need_relation(msg, "customer", 8);
    const Relation& nations = need_relation(msg, "nation", 6);
    for (const Tuple& c : customers) {
        if (!(num_at(c, 6, "ACCTBAL") > 3000.0)) continue; // early exit
        double cnation = num_at(c, 4, "CNATIONKEY");
        for (const Tuple& n : nations) {
            if (num_at(n, 2, "NATIONKEY") != cnation) continue;
            if (num_at(n, 4, "NREGIONKEY") == 3.0)
                return {channels.channels.empty() ? channels.default_channel : channels.channels[0],
                        msg};
        }
    }
    return {channels.default_channel, msg};
}

namespace {

template <typename T>
T get_field(const nlohmann::json& rec, const char* name) {
    auto it = rec.find(name);
    if (it == rec.end()) throw MissingField(name);
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw TypeMismatch(name, "unconvertible value");
    }
}

} // namespace

OrderNative order_from_json(const nlohmann::json& rec) {
    OrderNative o;
    o.id = get_field<std::string>(rec, "id");
    o.objecttype = get_field<std::string>(rec, "objecttype");
    o.orderkey = get_field<int64_t>(rec, "ORDERKEY");
    o.custkey = get_field<int64_t>(rec, "CUSTKEY");
    o.ototalprice = get_field<double>(rec, "OTOTALPRICE");
    o.opriority = get_field<std::string>(rec, "OPRIORITY");
    o.shippriority = get_field<int64_t>(rec, "SHIPPRIORITY");
    return o;
}

CustomerNationNative customer_from_json(const nlohmann::json& rec) {
    CustomerNationNative c;
    c.id = get_field<std::string>(rec, "id");
    c.objecttype = get_field<std::string>(rec, "objecttype");
    c.custkey = get_field<int64_t>(rec, "CUSTKEY");
    c.name = get_field<std::string>(rec, "NAME");
    c.cnationkey = get_field<int64_t>(rec, "CNATIONKEY");
    c.phone = get_field<std::string>(rec, "PHONE");
    c.acctbal = get_field<double>(rec, "ACCTBAL");
    c.mktsegment = get_field<std::string>(rec, "MKTSEGMENT");
    auto ctx = rec.find("context");
    if (ctx != rec.end() && ctx->is_array()) {
        c.nations.reserve(ctx->size());
        for (const auto& n : *ctx) {
            NationNative nn;
            nn.nationkey = get_field<int64_t>(n, "NATIONKEY");
            nn.nname = get_field<std::string>(n, "NNAME");
            nn.nregionkey = get_field<int64_t>(n, "NREGIONKEY");
            c.nations.push_back(std::move(nn));
        }
    }
    return c;
}

} // namespace tipflow
