#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace ppf::test {

using nlohmann::json;

/*======================================================================================================================
 * Fixtures
 *====================================================================================================================*/

std::string fixture_path(std::string_view relative) { return std::string(PPF_FIXTURES_DIR) + "/" + std::string(relative); }

std::string read_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Catalog fixture_catalog(std::string_view relative) { return load_catalog_file(fixture_path(relative)); }

Plan fixture_plan(std::string_view relative) { return load_plan(read_file(fixture_path(relative))); }

AmbiguousQuerySpec fixture_spec(std::string_view relative) { return load_spec(read_file(fixture_path(relative))); }

json unit_catalog_json()
{
    return json::parse(R"({
  "schema": {
    "collections": {
      "Docs":          {"kind": "Docs", "label": "sustainability", "key": "docid"},
      "EUDocs":        {"kind": "Docs", "label": "EUguidelines", "key": "docid"},
      "FundingDocs":   {"kind": "Docs", "label": "FundingDocs", "key": "docid"},
      "Suppliers":     {"kind": "Relation", "label": "Supplier", "key": "sid", "attributes": ["sid", "name"]},
      "Companies":     {"kind": "Relation", "label": "Company", "key": "cid", "attributes": ["cid", "name"]},
      "Parts":         {"kind": "Relation", "label": "Part", "key": "pid", "attributes": ["pid", "name"]},
      "Projects":      {"kind": "Relation", "key": "projid", "attributes": ["projid", "name"], "crs": "EPSG:4326",
                        "granularity": "FiscalQuarter"},
      "Calendar":      {"kind": "Relation", "key": "day", "granularity": "CalendarWeek"},
      "SupplierGraph": {"kind": "Nodes", "label": "Supplier"},
      "SuppliesEdges": {"kind": "Edges", "label": "Supplies"},
      "Regions3857":   {"kind": "Geometry", "label": "Polygon", "crs": "EPSG:3857"},
      "Regions4326":   {"kind": "Geometry", "label": "Polygon", "crs": "EPSG:4326"},
      "Sites":         {"kind": "Geometry", "label": "Point", "crs": "EPSG:4326"},
      "Timeline":      {"kind": "Temporal", "granularity": "FiscalQuarter"}
    },
    "mappings": ["docid -> sid", "docid -> projid"],
    "vectors": {"q_sust": "sustainability", "q_eu": "EUguidelines", "q_fund": "FundingDocs"},
    "taxonomy": {"Supplier": ["Organization"], "Company": []},
    "edges": {
      "Supplies": {"source": "Organization", "target": "Part"},
      "UsedIn":   {"source": "Part", "target": "Project"}
    },
    "transforms": ["EPSG:4326 -> EPSG:3857"]
  },
  "engines": {
    "postgres": {"ops": ["select", "project", "join", "groupby", "xi_d_r", "xi_r_d", "xi_r_t", "tselect",
                         "extract_entities", "extract_relations", "classify", "llm_enrich", "keyword", "fulltext"]},
    "postgis":  {"ops": ["sselect", "sjoin", "reproject", "sknn", "xi_r_g", "xi_g_r"]},
    "neo4j":    {"ops": ["traverse", "match", "xi_r_v", "xi_v_r"]},
    "qdrant":   {"ops": ["knn", "docsim"], "indexes": ["embedding"]}
  },
  "templates": {
    "knn":     {"epsilon": 0.05, "requires_index": "embedding", "required": ["q", "k"]},
    "docsim":  {"epsilon": 0.1},
    "sknn":    {"epsilon": 0.5},
    "keyword": {"deterministic_only": true},
    "tselect": {"granularity": "FiscalQuarter"}
  },
  "bins": {
    "epsilon":    [0.01, 0.05, 0.1, 0.5],
    "similarity": [0.5, 0.8, 0.9, 1.0],
    "distance":   [10, 100, 1000]
  }
})");
}

Catalog unit_catalog() { return catalog_from_json(unit_catalog_json()); }

/*======================================================================================================================
 * Generators
 *====================================================================================================================*/

namespace {

std::size_t pick(std::mt19937_64 &rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

const std::map<DataKind, std::vector<std::string>> &leaves_by_kind()
{
    static const std::map<DataKind, std::vector<std::string>> table = {
        {DataKind::Relation, {"Suppliers", "Parts", "Projects"}},
        {DataKind::Docs, {"Docs", "EUDocs"}},
        {DataKind::Geometry, {"Regions3857", "Sites"}},
        {DataKind::Nodes, {"SupplierGraph"}},
        {DataKind::Edges, {"SuppliesEdges"}},
        {DataKind::Temporal, {"Timeline"}},
    };
    return table;
}

std::string param_value(std::mt19937_64 &rng, const std::string &name)
{
    if (name == "q")
        return pick(rng, 2) ? "q_sust" : "q_eu";
    if (name == "k")
        return std::to_string(5 + pick(rng, 3) * 5);
    if (name == "threshold")
        return "0.8";
    return name + std::to_string(pick(rng, 3));
}

}

Plan random_plan(std::mt19937_64 &rng, std::size_t max_operators)
{
    Plan plan;
    std::map<DataKind, std::vector<NodeId>> pool;
    NodeId next = 0;
    for (const auto &[kind, names] : leaves_by_kind()) {
        if (pick(rng, 3) == 0 && kind != DataKind::Relation)
            continue;
        const std::string &name = names[pick(rng, names.size())];
        pool[kind].push_back(plan.add_leaf(next++, name, kind));
    }
    const std::size_t ops = 1 + pick(rng, std::max<std::size_t>(max_operators, 1));
    NodeId last = kNoNode;
    for (std::size_t i = 0; i < ops; ++i) {
        std::vector<const OperatorKind *> usable;
        for (const auto &k : all_operator_kinds()) {
            bool ok = std::all_of(k.input_kinds.begin(), k.input_kinds.end(),
                                  [&](DataKind d) { return pool.contains(d) && !pool[d].empty(); });
            if (ok)
                usable.push_back(&k);
        }
        const OperatorKind &k = *usable[pick(rng, usable.size())];
        OperatorInstance op{k.symbol, {}};
        for (auto name : k.required_params) {
            std::string n(name);
            op.params[n] = Param{tag_for_param(n), param_value(rng, n)};
        }
        if (pick(rng, 4) == 0)
            op.params["note"] = Param{tag_for_param("note"), "n" + std::to_string(pick(rng, 5))};
        std::vector<NodeId> children;
        for (DataKind d : k.input_kinds) {
            const auto &cands = pool[d];
            // favour recent nodes so the plan stays connected, but allow sharing older ones
            std::size_t idx = pick(rng, 3) ? cands.size() - 1 - pick(rng, std::min<std::size_t>(cands.size(), 2))
                                           : pick(rng, cands.size());
            children.push_back(cands[idx]);
        }
        last = plan.add_op(next++, std::move(op), children);
        pool[k.output_kind].push_back(last);
    }
    plan.roots = {last};
    prune_unreachable(plan);
    return plan;
}

ScenarioConfig random_small_config(std::mt19937_64 &rng, std::uint64_t seed)
{
    static const double ratios[] = {0.0, 0.34, 0.5, 0.67, 1.0};
    ScenarioConfig c;
    c.name = "random";
    c.seed = seed;
    const std::size_t points = 1 + pick(rng, 4);
    for (std::size_t i = 0; i < points; ++i)
        c.shape.push_back(1 + pick(rng, 3));
    c.max_alternatives = 3;
    c.feasibility_ratio = ratios[pick(rng, 5)];
    c.structural_overlap = 0.05 + 0.3 * static_cast<double>(pick(rng, 100)) / 100.0;
    c.engine_diversity = 0.2 + 0.7 * static_cast<double>(pick(rng, 100)) / 100.0;
    c.nodes_per_plan = 8 * points + 4 + pick(rng, 10);
    c.engines = 2 + pick(rng, 3);
    c.domains = 1 + pick(rng, 2);
    c.unique_tags = true;
    return c;
}

/*======================================================================================================================
 * Oracles
 *====================================================================================================================*/

std::string tree_text(const Plan &plan, NodeId root)
{
    const PlanNode &n = plan.at(root);
    if (n.is_leaf())
        return "[" + n.leaf().collection + "]";
    std::string out(n.op().kind().name);
    out += "{";
    bool first = true;
    for (const auto &[name, p] : n.op().params) {  // std::map: sorted by name
        if (!first)
            out += ",";
        first = false;
        out += name + "=" + p.value;
    }
    out += "}(";
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i)
            out += ",";
        out += tree_text(plan, n.children[i]);
    }
    return out + ")";
}

bool oracle_fully_feasible(const Plan &plan, const Catalog &catalog)
{
    Plan bound = plan;
    bind_leaf_kinds(bound, catalog);
    if (!validate_signature(bound).ok())
        return false;
    for (const auto &[id, node] : bound.nodes)
        if (node.is_leaf() && !catalog.collection(node.leaf().collection))
            return false;
    const auto anns = annotate_plan(bound, catalog);
    for (const auto &[id, node] : bound.nodes) {
        if (node.is_leaf())
            continue;
        std::vector<const AnnotationVector *> kids;
        for (NodeId c : node.children)
            kids.push_back(&anns.at(c));
        if (check_local(anns.at(id), kids, id))
            return false;
    }
    return true;
}

std::set<std::string> oracle_feasible_roots(const std::vector<Plan> &candidates, const Catalog &catalog)
{
    std::set<std::string> out;
    for (const Plan &p : candidates)
        if (oracle_fully_feasible(p, catalog))
            for (NodeId r : p.roots)
                out.insert(tree_text(p, r));
    return out;
}

std::set<std::string> root_trees(const std::vector<Plan> &plans)
{
    std::set<std::string> out;
    for (const Plan &p : plans)
        for (NodeId r : p.roots)
            out.insert(tree_text(p, r));
    return out;
}

std::optional<Witness> witness_on(const Plan &plan, const std::set<NodeId> &members, NodeId sink,
                                  const Catalog &catalog)
{
    const auto anns = annotate_plan(plan, catalog, &members);
    const PlanNode &n = plan.at(sink);
    if (n.is_leaf() || !anns.contains(sink))
        return std::nullopt;
    const AnnotationVector opaque = opaque_annotation();
    std::vector<const AnnotationVector *> kids;
    for (NodeId c : n.children) {
        auto it = members.contains(c) ? anns.find(c) : anns.end();
        kids.push_back(it == anns.end() ? &opaque : &it->second);
    }
    return check_local(anns.at(sink), kids, sink);
}

namespace {

bool connected_to(const Plan &plan, const std::set<NodeId> &members, NodeId sink)
{
    // every member must reach the sink through parent edges inside the set
    std::set<NodeId> reached = {sink};
    std::vector<NodeId> stack = {sink};
    while (!stack.empty()) {
        NodeId n = stack.back();
        stack.pop_back();
        for (NodeId c : plan.at(n).children)
            if (members.contains(c) && reached.insert(c).second)
                stack.push_back(c);
    }
    return reached == members;
}

}

bool oracle_exhaustively_minimal(const Plan &plan, const Certificate &cert, const Catalog &catalog, std::string *why)
{
    auto fail = [&](const std::string &msg) {
        if (why)
            *why = msg;
        return false;
    };
    const std::set<NodeId> full(cert.subplan.begin(), cert.subplan.end());
    auto same = [&](const std::optional<Witness> &w) {
        // the input slot is part of a witness: the same conflict on another input is a different explanation
        return w && w->family == cert.witness.family && w->evidence == cert.witness.evidence &&
               w->slot == cert.witness.slot;
    };
    if (!same(witness_on(plan, full, cert.operator_id, catalog)))
        return fail("the subplan does not reproduce its witness");
    std::vector<NodeId> others;
    for (NodeId n : cert.subplan)
        if (n != cert.operator_id)
            others.push_back(n);
    if (others.size() > 20)
        return fail("subplan too large for exhaustive enumeration");
    const std::size_t subsets = std::size_t{1} << others.size();
    for (std::size_t mask = 0; mask + 1 < subsets; ++mask) {   // every proper subset
        std::set<NodeId> s = {cert.operator_id};
        for (std::size_t i = 0; i < others.size(); ++i)
            if (mask & (std::size_t{1} << i))
                s.insert(others[i]);
        if (!connected_to(plan, s, cert.operator_id))
            continue;
        if (same(witness_on(plan, s, cert.operator_id, catalog))) {
            std::ostringstream msg;
            msg << "proper sub-DAG of size " << s.size() << " (of " << full.size() << ") reproduces the witness";
            return fail(msg.str());
        }
    }
    return true;
}

std::vector<Certificate> mutate_certificate(const Certificate &cert, const Plan &plan, std::mt19937_64 &rng)
{
    std::vector<Certificate> out;
    // drop one non-sink node
    std::vector<NodeId> others;
    for (NodeId n : cert.subplan)
        if (n != cert.operator_id)
            others.push_back(n);
    if (!others.empty()) {
        Certificate m = cert;
        NodeId drop = others[pick(rng, others.size())];
        m.subplan.erase(std::find(m.subplan.begin(), m.subplan.end(), drop));
        out.push_back(std::move(m));
    }
    // alter one evidence value
    if (!cert.witness.evidence.empty()) {
        Certificate m = cert;
        auto &ev = m.witness.evidence[pick(rng, m.witness.evidence.size())];
        ev.actual += "#mutated";
        out.push_back(std::move(m));
    }
    // swap the family
    {
        Certificate m = cert;
        auto f = static_cast<std::size_t>(cert.family);
        auto g = static_cast<ConstraintFamily>((f + 1 + pick(rng, kFamilyOrder.size() - 1)) % kFamilyOrder.size());
        m.family = g;
        m.witness.family = g;
        out.push_back(std::move(m));
    }
    // move the sink to another member
    if (!others.empty()) {
        Certificate m = cert;
        m.operator_id = others[pick(rng, others.size())];
        m.witness.at_operator = m.operator_id;
        out.push_back(std::move(m));
    }
    // add a node of the plan that is not in the subplan
    std::vector<NodeId> outside;
    for (const auto &[id, node] : plan.nodes)
        if (!std::binary_search(cert.subplan.begin(), cert.subplan.end(), id))
            outside.push_back(id);
    if (!outside.empty()) {
        Certificate m = cert;
        m.subplan.push_back(outside[pick(rng, outside.size())]);
        std::sort(m.subplan.begin(), m.subplan.end());
        out.push_back(std::move(m));
    }
    return out;
}

std::size_t total_label_space(const PackedPlanForest &forest)
{
    std::size_t total = 0;
    for (const auto &n : forest.nodes)
        total += n.members.size();
    return total;
}

std::vector<Plan> candidate_plans(const AmbiguousQuerySpec &spec, std::optional<std::size_t> limit)
{
    std::vector<Plan> out;
    for (auto &c : expand(spec, limit))
        out.push_back(std::move(c.plan));
    return out;
}

}
