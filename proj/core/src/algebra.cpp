#include <ppf/algebra.hpp>

#include <ppf/hash.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <queue>
#include <set>
#include <sstream>

namespace ppf {

std::string to_hex(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

namespace {

constexpr std::array<std::string_view, kNumDataKinds> kKindNames = {
    "Relation", "Nodes", "Edges", "Paths", "Docs", "Geometry", "Temporal",
};

using K = DataKind;
using F = OperatorFamily;

const std::vector<OperatorKind> &kinds_table()
{
    static const std::vector<OperatorKind> table = {
        {Symbol::Select,            "select",            "σ",       F::Relational, {K::Relation},             K::Relation, {"theta"}},
        {Symbol::Project,           "project",           "π",       F::Relational, {K::Relation},             K::Relation, {"attrs"}},
        {Symbol::Join,              "join",              "⋈",       F::Relational, {K::Relation, K::Relation}, K::Relation, {"theta"}},
        {Symbol::GroupBy,           "groupby",           "γ",       F::Relational, {K::Relation},             K::Relation, {"attrs", "agg"}},
        {Symbol::Traverse,          "traverse",          "τ",       F::Graph,      {K::Nodes},                K::Nodes,    {"edge"}},
        {Symbol::Match,             "match",             "μ",       F::Graph,      {K::Nodes},                K::Paths,    {"pattern"}},
        {Symbol::Keyword,           "keyword",           "κ",       F::TextVector, {K::Docs},                 K::Docs,     {"terms"}},
        {Symbol::FullText,          "fulltext",          "φ",       F::TextVector, {K::Docs},                 K::Docs,     {"expr"}},
        {Symbol::VectorTopK,        "knn",               "ν^k",     F::TextVector, {K::Docs},                 K::Docs,     {"q", "k"}},
        {Symbol::DocSimilarityJoin, "docsim",            "ς",       F::TextVector, {K::Docs, K::Docs},        K::Relation, {"q", "threshold"}},
        {Symbol::SpatialSelect,     "sselect",           "σ^S",     F::Spatial,    {K::Geometry},             K::Geometry, {"pred"}},
        {Symbol::SpatialJoin,       "sjoin",             "⋈^S",     F::Spatial,    {K::Geometry, K::Geometry}, K::Geometry, {"pred"}},
        {Symbol::Reproject,         "reproject",         "ρ^CRS",   F::Spatial,    {K::Geometry},             K::Geometry, {"from", "to"}},
        {Symbol::SpatialKnn,        "sknn",              "κ^S_nn",  F::Spatial,    {K::Geometry},             K::Geometry, {"k"}},
        {Symbol::ExtractEntities,   "extract_entities",  "η",       F::Semantic,   {K::Docs},                 K::Relation, {"type"}},
        {Symbol::ExtractRelations,  "extract_relations", "ρ_type",  F::Semantic,   {K::Docs},                 K::Edges,    {"type"}},
        {Symbol::Classify,          "classify",          "χ",       F::Semantic,   {K::Docs},                 K::Relation, {"label"}},
        {Symbol::LlmEnrich,         "llm_enrich",        "ς^LLM",   F::Semantic,   {K::Docs},                 K::Docs,     {"task"}},
        {Symbol::RelToNodes,        "xi_r_v",            "ξ_{R→V}", F::CrossModel, {K::Relation},             K::Nodes,    {}},
        {Symbol::GraphToRel,        "xi_v_r",            "ξ_{V→R}", F::CrossModel, {K::Nodes, K::Edges},      K::Relation, {}},
        {Symbol::RelToDocs,         "xi_r_d",            "ξ_{R→D}", F::CrossModel, {K::Relation},             K::Docs,     {}},
        {Symbol::DocsToRel,         "xi_d_r",            "ξ_{D→R}", F::CrossModel, {K::Docs},                 K::Relation, {"target"}},
        {Symbol::RelToGeom,         "xi_r_g",            "ξ_{R→G}", F::CrossModel, {K::Relation},             K::Geometry, {}},
        {Symbol::GeomToRel,         "xi_g_r",            "ξ_{G→R}", F::CrossModel, {K::Geometry},             K::Relation, {}},
        {Symbol::RelToTemporal,     "xi_r_t",            "ξ_{R→T}", F::Temporal,   {K::Relation},             K::Temporal, {}, true},
        {Symbol::TemporalSelect,    "tselect",           "σ^T",     F::Temporal,   {K::Temporal},             K::Temporal, {"window"}, true},
    };
    return table;
}

}

std::string_view to_string(DataKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<DataKind> parse_data_kind(std::string_view text)
{
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (kKindNames[i] == text)
            return static_cast<DataKind>(i);
    // single-letter notation used by the operator table
    static constexpr std::pair<std::string_view, DataKind> kShort[] = {
        {"R", K::Relation}, {"V", K::Nodes}, {"E", K::Edges}, {"P", K::Paths},
        {"D", K::Docs}, {"G", K::Geometry}, {"T", K::Temporal},
    };
    for (auto [s, k] : kShort)
        if (s == text)
            return k;
    return std::nullopt;
}

const OperatorKind & operator_kind(Symbol symbol)
{
    const auto &table = kinds_table();
    return table[static_cast<std::size_t>(symbol)];
}

std::span<const OperatorKind> all_operator_kinds() { return kinds_table(); }

std::optional<Symbol> parse_symbol(std::string_view name)
{
    for (const auto &k : kinds_table())
        if (k.name == name)
            return k.symbol;
    return std::nullopt;
}

std::string_view to_string(ParamTag tag)
{
    switch (tag) {
        case ParamTag::Predicate:    return "predicate";
        case ParamTag::AttrList:     return "attr-list";
        case ParamTag::CrsCode:      return "crs-code";
        case ParamTag::VectorRef:    return "vector-ref";
        case ParamTag::Integer:      return "integer";
        case ParamTag::ThresholdBin: return "threshold-bin";
        case ParamTag::Text:         return "text";
    }
    return "text";
}

ParamTag tag_for_param(std::string_view name)
{
    if (name == "theta" || name == "pred" || name == "pattern" || name == "expr" || name == "window")
        return ParamTag::Predicate;
    if (name == "attrs" || name == "agg")
        return ParamTag::AttrList;
    if (name == "from" || name == "to" || name == "crs")
        return ParamTag::CrsCode;
    if (name == "q")
        return ParamTag::VectorRef;
    if (name == "k")
        return ParamTag::Integer;
    if (name == "threshold" || name == "radius")
        return ParamTag::ThresholdBin;
    return ParamTag::Text;
}

const Param * OperatorInstance::param(std::string_view name) const
{
    auto it = params.find(std::string(name));
    return it == params.end() ? nullptr : &it->second;
}

std::string OperatorInstance::canonical_params() const
{
    std::string out;
    for (const auto &[name, p] : params) {
        if (!out.empty())
            out += ' ';
        out += name;
        out += '=';
        out += p.value;
    }
    return out;
}

OperatorInstance make_op(Symbol symbol, std::initializer_list<std::pair<std::string, std::string>> params)
{
    OperatorInstance op{symbol, {}};
    for (const auto &[name, value] : params)
        op.params[name] = Param{tag_for_param(name), value};
    return op;
}

std::optional<DataKind> PlanNode::output_kind() const
{
    if (is_leaf())
        return leaf().kind;
    return op().kind().output_kind;
}

/*======================================================================================================================
 * Plan
 *====================================================================================================================*/

const PlanNode & Plan::at(NodeId id) const
{
    auto it = nodes.find(id);
    if (it == nodes.end())
        throw std::out_of_range("plan has no node " + std::to_string(id));
    return it->second;
}

PlanNode & Plan::at(NodeId id)
{
    auto it = nodes.find(id);
    if (it == nodes.end())
        throw std::out_of_range("plan has no node " + std::to_string(id));
    return it->second;
}

std::size_t Plan::num_operators() const
{
    return std::count_if(nodes.begin(), nodes.end(), [](const auto &kv) { return !kv.second.is_leaf(); });
}

NodeId Plan::add_leaf(NodeId id, std::string collection, std::optional<DataKind> kind)
{
    nodes[id] = PlanNode{id, LeafRef{std::move(collection), kind}, {}};
    return id;
}

NodeId Plan::add_op(NodeId id, OperatorInstance op, std::vector<NodeId> children)
{
    nodes[id] = PlanNode{id, std::move(op), std::move(children)};
    return id;
}

std::map<NodeId, std::vector<NodeId>> Plan::parents() const
{
    std::map<NodeId, std::vector<NodeId>> out;
    for (const auto &[id, node] : nodes) {
        out[id];
        for (NodeId c : node.children)
            if (c != kNoNode) {
                auto &ps = out[c];
                if (ps.empty() || ps.back() != id)
                    ps.push_back(id);
            }
    }
    return out;
}

std::vector<NodeId> Plan::descendants(NodeId from) const
{
    std::set<NodeId> seen;
    std::vector<NodeId> stack{from};
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        if (!seen.insert(id).second)
            continue;
        auto it = nodes.find(id);
        if (it == nodes.end())
            continue;
        for (NodeId c : it->second.children)
            if (c != kNoNode)
                stack.push_back(c);
    }
    return {seen.begin(), seen.end()};
}

/*======================================================================================================================
 * Validation
 *====================================================================================================================*/

CycleError::CycleError(NodeId from, NodeId to)
    : std::runtime_error("cycle through edge " + std::to_string(from) + " -> " + std::to_string(to))
    , from(from), to(to)
{ }

std::vector<NodeId> topological_order(const Plan &plan)
{
    // Kahn's algorithm over child -> parent edges with a min-heap on ids.
    std::map<NodeId, std::size_t> pending;
    std::map<NodeId, std::vector<NodeId>> parents_of;
    for (const auto &[id, node] : plan.nodes) {
        std::set<NodeId> distinct;
        for (NodeId c : node.children)
            if (c != kNoNode && plan.contains(c))
                distinct.insert(c);
        pending[id] = distinct.size();
        for (NodeId c : distinct)
            parents_of[c].push_back(id);
    }

    std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
    for (const auto &[id, n] : pending)
        if (n == 0)
            ready.push(id);

    std::vector<NodeId> order;
    order.reserve(plan.nodes.size());
    while (!ready.empty()) {
        NodeId id = ready.top();
        ready.pop();
        order.push_back(id);
        for (NodeId p : parents_of[id])
            if (--pending[p] == 0)
                ready.push(p);
    }

    if (order.size() != plan.nodes.size()) {
        // Some node is left with unresolved children; walk down to find a back edge.
        NodeId start = kNoNode;
        for (const auto &[id, n] : pending)
            if (n > 0) { start = id; break; }
        std::map<NodeId, int> color;  // 1 = on stack, 2 = done
        std::vector<std::pair<NodeId, std::size_t>> stack{{start, 0}};
        color[start] = 1;
        while (!stack.empty()) {
            auto &[id, slot] = stack.back();
            const auto &children = plan.at(id).children;
            if (slot == children.size()) {
                color[id] = 2;
                stack.pop_back();
                continue;
            }
            NodeId c = children[slot++];
            if (c == kNoNode || !plan.contains(c))
                continue;
            if (color[c] == 1)
                throw CycleError(id, c);
            if (color[c] == 0) {
                color[c] = 1;
                stack.emplace_back(c, 0);
            }
        }
        throw CycleError(start, start);
    }
    return order;
}

std::vector<StructuralError> check_structure(const Plan &plan)
{
    std::vector<StructuralError> errors;
    if (plan.roots.empty())
        errors.push_back({StructuralError::Kind::NoRoots, kNoNode, "no roots"});
    for (NodeId r : plan.roots)
        if (!plan.contains(r))
            errors.push_back({StructuralError::Kind::UnknownRoot, r, "root " + std::to_string(r) + " is not a node"});

    for (const auto &[id, node] : plan.nodes) {
        if (node.is_leaf()) {
            if (!node.children.empty())
                errors.push_back({StructuralError::Kind::ArityMismatch, id, "leaf has inputs"});
            continue;
        }
        const auto &kind = node.op().kind();
        if (node.children.size() != kind.arity()) {
            errors.push_back({StructuralError::Kind::ArityMismatch, id,
                              std::string(kind.name) + " expects " + std::to_string(kind.arity()) + " inputs, got " +
                                  std::to_string(node.children.size())});
        }
        for (std::size_t s = 0; s < node.children.size(); ++s) {
            NodeId c = node.children[s];
            if (c == kNoNode)
                errors.push_back({StructuralError::Kind::MissingSlot, id, "slot " + std::to_string(s) + " is open"});
            else if (!plan.contains(c))
                errors.push_back({StructuralError::Kind::DanglingChild, id, "child " + std::to_string(c) + " is not a node"});
        }
    }

    try {
        topological_order(plan);
    } catch (const CycleError &e) {
        errors.push_back({StructuralError::Kind::Cycle, e.from, e.what()});
    }
    return errors;
}

SignatureReport validate_signature(const Plan &plan)
{
    SignatureReport report;
    report.structural = check_structure(plan);
    if (!report.structural.empty())
        return report;

    for (const auto &[id, node] : plan.nodes) {
        if (node.is_leaf())
            continue;
        const auto &kind = node.op().kind();
        for (std::size_t s = 0; s < node.children.size(); ++s) {
            auto actual = plan.at(node.children[s]).output_kind();
            if (actual && *actual != kind.input_kinds[s])
                report.violations.push_back({id, node.children[s], s, kind.input_kinds[s], *actual});
        }
    }
    return report;
}

void prune_unreachable(Plan &plan)
{
    std::set<NodeId> keep;
    for (NodeId r : plan.roots)
        for (NodeId d : plan.descendants(r))
            keep.insert(d);
    std::erase_if(plan.nodes, [&](const auto &kv) { return !keep.contains(kv.first); });
}

/*======================================================================================================================
 * Structural hashing and canonical form
 *====================================================================================================================*/

std::map<NodeId, std::uint64_t> structural_hashes(const Plan &plan)
{
    std::map<NodeId, std::uint64_t> h;
    for (NodeId id : topological_order(plan)) {
        const auto &node = plan.at(id);
        std::uint64_t v;
        if (node.is_leaf()) {
            v = fnv1a("LEAF " + node.leaf().collection);
            if (node.leaf().kind)
                v = fnv1a(to_string(*node.leaf().kind), v);
        } else {
            v = fnv1a(node.op().kind().name);
            v = fnv1a(node.op().canonical_params(), v);
            for (NodeId c : node.children)
                v = hash_combine(v, c == kNoNode ? 0 : h.at(c));
        }
        h[id] = v;
    }
    return h;
}

Plan canonicalize(const Plan &plan)
{
    auto hashes = structural_hashes(plan);

    std::vector<NodeId> roots = plan.roots;
    std::stable_sort(roots.begin(), roots.end(), [&](NodeId a, NodeId b) { return hashes.at(a) < hashes.at(b); });

    std::map<NodeId, NodeId> remap;
    NodeId next = 0;
    auto visit = [&](auto &&self, NodeId id) -> void {
        if (remap.contains(id))
            return;
        for (NodeId c : plan.at(id).children)
            if (c != kNoNode)
                self(self, c);
        remap[id] = next++;
    };
    for (NodeId r : roots)
        visit(visit, r);

    // nodes unreachable from any root keep a stable position after the reachable part
    std::vector<NodeId> rest;
    for (const auto &[id, _] : plan.nodes)
        if (!remap.contains(id))
            rest.push_back(id);
    std::stable_sort(rest.begin(), rest.end(), [&](NodeId a, NodeId b) { return hashes.at(a) < hashes.at(b); });
    for (NodeId id : rest)
        visit(visit, id);

    Plan out;
    for (const auto &[id, node] : plan.nodes) {
        PlanNode n = node;
        n.id = remap.at(id);
        for (NodeId &c : n.children)
            if (c != kNoNode)
                c = remap.at(c);
        out.nodes[n.id] = std::move(n);
    }
    for (NodeId r : roots)
        out.roots.push_back(remap.at(r));
    return out;
}

Plan hash_cons(const Plan &plan)
{
    auto hashes = structural_hashes(plan);
    std::map<std::uint64_t, NodeId> first;
    std::map<NodeId, NodeId> rep;
    for (NodeId id : topological_order(plan)) {
        auto [it, inserted] = first.emplace(hashes.at(id), id);
        rep[id] = it->second;
    }
    Plan out;
    for (const auto &[id, node] : plan.nodes) {
        if (rep.at(id) != id)
            continue;
        PlanNode n = node;
        for (NodeId &c : n.children)
            if (c != kNoNode)
                c = rep.at(c);
        out.nodes[id] = std::move(n);
    }
    for (NodeId r : plan.roots) {
        NodeId m = rep.at(r);
        if (std::find(out.roots.begin(), out.roots.end(), m) == out.roots.end())
            out.roots.push_back(m);
    }
    return out;
}

bool structurally_equal(const Plan &a, const Plan &b) { return serialize_plan(a) == serialize_plan(b); }

}
