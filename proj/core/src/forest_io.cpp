#include <ppf/forest.hpp>
#include <ppf/hash.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>

namespace ppf {

using nlohmann::json;

namespace {

json payload_to_json(const std::variant<LeafRef, OperatorInstance> &payload)
{
    if (const auto *leaf = std::get_if<LeafRef>(&payload)) {
        json j{{"collection", leaf->collection}};
        if (leaf->kind)
            j["kind"] = std::string(to_string(*leaf->kind));
        return j;
    }
    const auto &op = std::get<OperatorInstance>(payload);
    json params = json::object();
    for (const auto &[name, p] : op.params)
        params[name] = p.value;
    return {{"symbol", std::string(op.kind().name)}, {"params", std::move(params)}};
}

std::variant<LeafRef, OperatorInstance> payload_from_json(const json &j)
{
    if (j.contains("collection")) {
        LeafRef leaf{j["collection"].get<std::string>(), std::nullopt};
        if (j.contains("kind"))
            leaf.kind = parse_data_kind(j["kind"].get<std::string>());
        return leaf;
    }
    auto symbol = parse_symbol(j.at("symbol").get<std::string>());
    if (!symbol)
        throw ParseError(0, "symbol", "unknown operator in forest document");
    OperatorInstance op{*symbol, {}};
    const json params = j.value("params", json::object());
    for (const auto &[name, value] : params.items())
        op.params[name] = Param{tag_for_param(name), value.get<std::string>()};
    return op;
}

}

json forest_to_json(const PackedPlanForest &forest)
{
    std::vector<const PPFNode *> order;
    for (const auto &n : forest.nodes)
        order.push_back(&n);
    std::stable_sort(order.begin(), order.end(), [](const PPFNode *a, const PPFNode *b) {
        return std::tie(a->digest, a->id) < std::tie(b->digest, b->id);
    });
    json nodes = json::array();
    for (const PPFNode *n : order) {
        json members = json::array();
        for (const auto &m : n->members)
            members.push_back(annotation_to_json(m));
        nodes.push_back({{"id", n->id},
                         {"key", n->key},
                         {"digest", to_hex(n->digest)},
                         {"payload", payload_to_json(n->payload)},
                         {"annotation_class", annotation_to_json(n->annotation)},
                         {"members", std::move(members)},
                         {"derivations", n->derivations}});
    }
    json pruned = json::array();
    for (const auto &[plan, w] : forest.pruned_witnesses)
        pruned.push_back({{"plan_index", plan}, {"witness", witness_to_json(w)}});
    return {{"nodes", std::move(nodes)}, {"roots", forest.roots}, {"pruned_witnesses", std::move(pruned)}};
}

PackedPlanForest forest_from_json(const json &doc)
{
    PackedPlanForest forest;
    const json &nodes = doc.at("nodes");
    forest.nodes.resize(nodes.size());
    for (const auto &j : nodes) {
        auto id = j.at("id").get<NodeId>();
        if (id < 0 || static_cast<std::size_t>(id) >= nodes.size())
            throw ParseError(0, "nodes.id", "forest node ids must be dense");
        PPFNode &n = forest.nodes[static_cast<std::size_t>(id)];
        n.id = id;
        n.payload = payload_from_json(j.at("payload"));
        n.key = j.at("key").get<std::string>();
        n.digest = fnv1a(n.key);
        n.annotation = annotation_from_json(j.at("annotation_class"));
        for (const auto &m : j.value("members", json::array()))
            n.members.push_back(annotation_from_json(m));
        n.derivations = j.value("derivations", std::vector<std::vector<NodeId>>{});
        for (const auto &d : n.derivations)
            for (NodeId c : d)
                if (c < 0 || static_cast<std::size_t>(c) >= nodes.size())
                    throw ParseError(0, "nodes.derivations", "derivation references unknown node");
    }
    forest.roots = doc.value("roots", std::vector<NodeId>{});
    for (NodeId r : forest.roots)
        if (r < 0 || static_cast<std::size_t>(r) >= nodes.size())
            throw ParseError(0, "roots", "root references unknown node");
    for (const auto &p : doc.value("pruned_witnesses", json::array()))
        forest.pruned_witnesses.emplace_back(p.at("plan_index").get<std::size_t>(), witness_from_json(p.at("witness")));
    forest.reindex();
    return forest;
}

json stats_to_json(const SizeStats &s)
{
    return {{"m", s.num_plans},
            {"N_bar", s.nodes_per_plan},
            {"total_nodes", s.total_nodes},
            {"UniqA", s.unique_all},
            {"UniqF", s.unique_feasible},
            {"PkA", s.packed_ratio_pre},
            {"PkF", s.packed_ratio_post},
            {"PrU", s.pruned_unique},
            {"build_ms", s.build_ms},
            {"peak_mem_kb", s.peak_mem_kb},
            {"peak_mem_method", "getrusage ru_maxrss (process high-water mark)"},
            {"bound", {{"n", s.n}, {"k", s.k}, {"d", s.d}, {"A", s.num_annotations}, {"edges", s.num_edges}}},
            {"surviving_plans", s.surviving_plans}};
}

SizeStats stats_from_json(const json &j)
{
    SizeStats s;
    s.num_plans = j.value("m", std::size_t{0});
    s.total_nodes = j.value("total_nodes", std::size_t{0});
    s.unique_all = j.value("UniqA", std::size_t{0});
    s.unique_feasible = j.value("UniqF", std::size_t{0});
    s.build_ms = j.value("build_ms", 0.0);
    s.peak_mem_kb = j.value("peak_mem_kb", 0L);
    s.surviving_plans = j.value("surviving_plans", std::size_t{0});
    if (j.contains("bound")) {
        const json &b = j["bound"];
        s.n = b.value("n", std::size_t{0});
        s.k = b.value("k", std::size_t{0});
        s.d = b.value("d", std::size_t{0});
        s.num_annotations = b.value("A", std::size_t{0});
        s.num_edges = b.value("edges", std::size_t{0});
    }
    s.finalize();
    return s;
}

json forest_document_to_json(const ForestDocument &doc)
{
    json certs = json::array();
    for (const auto &c : doc.certificates)
        certs.push_back(certificate_to_json(c));
    return {{"forest", forest_to_json(doc.forest)},
            {"catalog", catalog_to_json(doc.catalog)},
            {"stats", stats_to_json(doc.stats)},
            {"certificates", std::move(certs)}};
}

ForestDocument forest_document_from_json(const json &j)
{
    ForestDocument doc;
    doc.forest = forest_from_json(j.at("forest"));
    doc.catalog = catalog_from_json(j.at("catalog"));
    if (j.contains("stats"))
        doc.stats = stats_from_json(j["stats"]);
    for (const auto &c : j.value("certificates", json::array()))
        doc.certificates.push_back(certificate_from_json(c));
    return doc;
}

}
