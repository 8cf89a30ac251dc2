#include <ppf/catalog.hpp>
#include <ppf/feasibility.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>

namespace ppf {

using nlohmann::json;

namespace {

const AnnotationVector & opaque()
{
    static const AnnotationVector value = opaque_annotation();
    return value;
}

const AnnotationVector & child_at(std::span<const AnnotationVector *const> children, std::size_t i)
{
    if (i < children.size() && children[i])
        return *children[i];
    return opaque();
}

std::optional<double> parse_double(const std::string &text)
{
    char *end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        return std::nullopt;
    return v;
}

std::optional<Uncertainty> own_uncertainty(const OperatorTemplate *tmpl, const Catalog &catalog)
{
    if (!tmpl || !tmpl->epsilon)
        return std::nullopt;
    auto it = catalog.bins.find("epsilon");
    if (it == catalog.bins.end())
        return Uncertainty{0, "ε"};
    std::size_t idx = discretize_index(*tmpl->epsilon, it->second);
    return Uncertainty{static_cast<int>(idx), it->second.label(idx)};
}

/// Embedding domains an input may carry for a query vector of domain `domain`.
std::set<std::string> compatible_domains(const std::string &domain, const Catalog &catalog)
{
    std::set<std::string> universe{domain};
    for (const auto &[_, c] : catalog.collections)
        if (c.kind == DataKind::Docs)
            universe.insert(c.label);
    for (const auto &[_, d] : catalog.vectors)
        universe.insert(d);
    for (const auto &[a, b] : catalog.tag_compat) {
        universe.insert(a);
        universe.insert(b);
    }
    std::set<std::string> out;
    for (const auto &d : universe)
        if (catalog.tags_compatible(domain, d))
            out.insert(d);
    return out;
}

void set_label(AnnotationVector &a, std::optional<std::string> label, const Catalog &catalog)
{
    a.label = std::move(label);
    a.supertypes.clear();
    if (a.label)
        a.supertypes = catalog.supertypes(*a.label);
}

void copy_type(AnnotationVector &a, const AnnotationVector &from)
{
    a.label = from.label;
    a.supertypes = from.supertypes;
    a.key = from.key;
}

std::optional<std::string> param_value(const OperatorInstance &op, std::string_view name)
{
    const Param *p = op.param(name);
    if (!p || p->unbound())
        return std::nullopt;
    return p->value;
}

}

AnnotationVector opaque_annotation()
{
    AnnotationVector a;
    a.uncertainty = std::nullopt;
    a.tags = std::nullopt;
    return a;
}

/*======================================================================================================================
 * Derivation
 *====================================================================================================================*/

AnnotationVector derive_leaf_annotation(const LeafRef &leaf, const Catalog &catalog)
{
    AnnotationVector a;
    a.output_kind = leaf.kind;
    a.uncertainty = Uncertainty{};
    a.tags = std::set<std::string>{};

    const CollectionDescriptor *coll = catalog.collection(leaf.collection);
    if (!coll) {
        a.undeclared_collection = leaf.collection;
        a.placement = catalog.all_engines();
        return a;
    }
    if (leaf.kind && *leaf.kind != coll->kind)
        a.undeclared_collection = leaf.collection + " as " + std::string(to_string(*leaf.kind));
    a.output_kind = coll->kind;
    set_label(a, coll->label, catalog);
    a.key = coll->key;
    if (coll->kind == DataKind::Geometry)
        a.crs = coll->crs;
    if (coll->kind == DataKind::Temporal)
        a.granularity = coll->granularity;
    if (coll->engine)
        a.placement = {*coll->engine};
    else
        a.placement = catalog.all_engines();
    return a;
}

AnnotationVector derive_annotation(const OperatorInstance &op, std::span<const AnnotationVector *const> children,
                                   const Catalog &catalog)
{
    const OperatorKind &kind = op.kind();
    const OperatorTemplate *tmpl = catalog.template_for(op.symbol);
    const AnnotationVector &c0 = child_at(children, 0);
    const AnnotationVector &c1 = child_at(children, 1);

    AnnotationVector a;
    a.output_kind = kind.output_kind;
    a.inputs.resize(kind.arity());

    // binding status
    for (const auto &[name, p] : op.params) {
        if (p.unbound())
            a.binding[name] = Binding::Unbound;
        else if (p.tag == ParamTag::VectorRef)
            a.binding[name] = catalog.vectors.contains(p.value) ? Binding::Bound : Binding::Unbound;
        else
            a.binding[name] = Binding::Bound;
    }
    if (tmpl)
        for (const auto &name : tmpl->required)
            if (!op.param(name))
                a.binding[name] = Binding::Unbound;

    // discretized continuous parameters
    for (const auto &[name, table] : {std::pair{"threshold", "similarity"}, std::pair{"radius", "distance"}}) {
        auto v = param_value(op, name);
        if (!v || !catalog.bins.contains(table))
            continue;
        if (auto d = parse_double(*v))
            a.bins[name] = discretize(*d, catalog, table);
    }

    // placement
    std::optional<std::string> index = param_value(op, "index");
    if (!index && tmpl)
        index = tmpl->requires_index;
    a.placement = catalog.engines_supporting(op.symbol, index);

    // uncertainty: template profile, escalated to the widest ε-bin among inputs
    std::optional<Uncertainty> own = own_uncertainty(tmpl, catalog);
    bool unknown_child = false;
    Uncertainty widest = own.value_or(Uncertainty{});
    for (std::size_t i = 0; i < kind.arity(); ++i) {
        const auto &c = child_at(children, i);
        if (!c.uncertainty) {
            unknown_child = true;
            continue;
        }
        if (c.uncertainty->eps_bin > widest.eps_bin)
            widest = *c.uncertainty;
    }
    if (unknown_child && !own)
        a.uncertainty = std::nullopt;
    else
        a.uncertainty = widest;

    // semantic tags: own query-vector domain plus everything inherited
    std::set<std::string> tags;
    std::optional<std::string> query_domain;
    if (auto q = param_value(op, "q"); q && catalog.vectors.contains(*q)) {
        query_domain = catalog.vectors.at(*q);
        tags.insert(*query_domain);
    }
    if (op.symbol == Symbol::LlmEnrich)
        if (auto task = param_value(op, "task"))
            tags.insert(*task);
    bool tags_known = true;
    for (std::size_t i = 0; i < kind.arity(); ++i) {
        const auto &c = child_at(children, i);
        if (!c.tags)
            tags_known = false;
        else
            tags.insert(c.tags->begin(), c.tags->end());
    }
    if (tags_known)
        a.tags = std::move(tags);

    if (tmpl && tmpl->deterministic_only)
        for (auto &slot : a.inputs)
            slot.deterministic_only = true;

    a.units = param_value(op, "units");

    // type profile and reference system, per operator
    switch (op.symbol) {
        case Symbol::Select:
        case Symbol::Project:
        case Symbol::GroupBy:
        case Symbol::Keyword:
        case Symbol::FullText:
        case Symbol::LlmEnrich:
        case Symbol::SpatialKnn:
            copy_type(a, c0);
            a.crs = c0.crs;
            break;

        case Symbol::Join:
            if (c0.label && c1.label)
                a.label = *c0.label + "⋈" + *c1.label;
            if (a.label)
                a.supertypes = {*a.label};
            a.key = c0.key;
            break;

        case Symbol::Traverse: {
            auto edge = param_value(op, "edge");
            auto it = edge ? catalog.edges.find(*edge) : catalog.edges.end();
            if (it == catalog.edges.end()) {
                if (edge)
                    a.undeclared_collection = "edge " + *edge;
                break;
            }
            a.inputs[0].accepted = std::set<std::string>{it->second.source};
            a.inputs[0].align = SlotExpectation::Align::Label;
            a.inputs[0].align_source = it->first;
            set_label(a, it->second.target, catalog);
            a.key = c0.key;
            break;
        }

        case Symbol::Match:
            set_label(a, std::string("Path"), catalog);
            a.key = c0.key;
            break;

        case Symbol::VectorTopK:
        case Symbol::DocSimilarityJoin:
            if (query_domain) {
                auto accepted = compatible_domains(*query_domain, catalog);
                for (auto &slot : a.inputs) {
                    slot.accepted = accepted;
                    slot.align = SlotExpectation::Align::Embedding;
                    slot.align_source = *param_value(op, "q");
                }
            }
            if (op.symbol == Symbol::VectorTopK) {
                copy_type(a, c0);
            } else {
                set_label(a, std::string("DocPairs"), catalog);
            }
            break;

        case Symbol::SpatialSelect:
            copy_type(a, c0);
            a.crs = c0.crs;
            if (auto region = param_value(op, "region")) {
                const CollectionDescriptor *r = catalog.collection(*region);
                if (!r || r->kind != DataKind::Geometry)
                    a.undeclared_collection = "region " + *region;
                else
                    a.inputs[0].crs = r->crs;
            }
            break;

        case Symbol::SpatialJoin:
            copy_type(a, c0);
            a.crs = c0.crs;
            a.inputs[1].crs = c0.crs;
            break;

        case Symbol::Reproject:
            copy_type(a, c0);
            a.inputs[0].crs = param_value(op, "from");
            a.crs = param_value(op, "to");
            break;

        case Symbol::ExtractEntities:
        case Symbol::ExtractRelations:
            set_label(a, param_value(op, "type"), catalog);
            break;

        case Symbol::Classify:
            if (auto l = param_value(op, "label"))
                set_label(a, "class:" + *l, catalog);
            break;

        case Symbol::RelToNodes:
            if (auto l = param_value(op, "label"))
                set_label(a, *l, catalog);
            else if (c0.label) {
                const CollectionDescriptor *coll = catalog.collection(*c0.label);
                set_label(a, coll ? coll->label : *c0.label, catalog);
            }
            a.key = c0.key;
            break;

        case Symbol::GraphToRel:
            copy_type(a, c0);
            if (a.label)
                a.supertypes = {*a.label};
            break;

        case Symbol::RelToDocs:
            if (auto d = param_value(op, "domain"))
                set_label(a, *d, catalog);
            else
                set_label(a, c0.label, catalog);
            a.key = param_value(op, "key");
            if (!a.key)
                a.key = c0.key;
            break;

        case Symbol::DocsToRel: {
            auto target = param_value(op, "target");
            if (c0.key && target) {
                std::string from = c0.key->empty() ? std::string("?") : *c0.key;
                a.mapping = MappingStatus{from + " -> " + *target, catalog.has_mapping(from, *target)};
            }
            if (target) {
                set_label(a, "ids:" + *target, catalog);
                a.key = *target;
            }
            break;
        }

        case Symbol::RelToGeom:
            set_label(a, std::string("Point"), catalog);
            a.key = c0.key;
            if (c0.label) {
                const CollectionDescriptor *coll = catalog.collection(*c0.label);
                a.crs = (coll && coll->crs) ? *coll->crs : catalog.geocode_crs;
            }
            break;

        case Symbol::GeomToRel:
            set_label(a, std::string("coords"), catalog);
            a.key = c0.key;
            break;

        case Symbol::RelToTemporal:
            set_label(a, std::string("Interval"), catalog);
            a.key = c0.key;
            if (c0.label)
                if (const CollectionDescriptor *coll = catalog.collection(*c0.label))
                    a.granularity = coll->granularity;
            break;

        case Symbol::TemporalSelect: {
            copy_type(a, c0);
            std::optional<Granularity> g;
            if (auto text = param_value(op, "granularity"))
                g = parse_granularity(*text);
            if (!g && tmpl)
                g = tmpl->granularity;
            a.inputs[0].granularity = g;
            a.granularity = g ? g : c0.granularity;
            break;
        }
    }
    return a;
}

std::variant<AnnotationVector, Witness> annotate(const OperatorInstance &op,
                                                 std::span<const AnnotationVector *const> children,
                                                 const Catalog &catalog, NodeId at)
{
    AnnotationVector a = derive_annotation(op, children, catalog);
    if (auto w = check_unary(ConstraintFamily::PLACE, a, at))
        return *w;
    return a;
}

std::map<NodeId, AnnotationVector> annotate_plan(const Plan &plan, const Catalog &catalog, const std::set<NodeId> *only)
{
    std::map<NodeId, AnnotationVector> out;
    for (NodeId id : topological_order(plan)) {
        if (only && !only->contains(id))
            continue;
        const PlanNode &node = plan.at(id);
        if (node.is_leaf()) {
            out[id] = derive_leaf_annotation(node.leaf(), catalog);
            continue;
        }
        std::vector<const AnnotationVector *> kids;
        for (NodeId c : node.children) {
            auto it = out.find(c);
            kids.push_back(it == out.end() ? nullptr : &it->second);
        }
        out[id] = derive_annotation(node.op(), kids, catalog);
    }
    return out;
}

void bind_leaf_kinds(Plan &plan, const Catalog &catalog)
{
    for (auto &[id, node] : plan.nodes) {
        if (!node.is_leaf())
            continue;
        auto &leaf = std::get<LeafRef>(node.payload);
        if (!leaf.kind)
            if (const CollectionDescriptor *c = catalog.collection(leaf.collection))
                leaf.kind = c->kind;
    }
}

/*======================================================================================================================
 * Canonical text and JSON
 *====================================================================================================================*/

namespace {

json expectation_to_json(const SlotExpectation &s)
{
    json j = json::object();
    if (s.accepted) {
        j["accepted"] = *s.accepted;
        j["align"] = s.align == SlotExpectation::Align::Label ? "label" : "embedding";
        j["align_source"] = s.align_source;
    }
    if (s.crs)
        j["crs"] = *s.crs;
    if (s.granularity)
        j["granularity"] = std::string(to_string(*s.granularity));
    if (s.deterministic_only)
        j["deterministic_only"] = true;
    return j;
}

SlotExpectation expectation_from_json(const json &j)
{
    SlotExpectation s;
    if (j.contains("accepted")) {
        s.accepted = j["accepted"].get<std::set<std::string>>();
        s.align = j.value("align", "label") == "label" ? SlotExpectation::Align::Label : SlotExpectation::Align::Embedding;
        s.align_source = j.value("align_source", "");
    }
    if (j.contains("crs"))
        s.crs = j["crs"].get<std::string>();
    if (j.contains("granularity"))
        s.granularity = parse_granularity(j["granularity"].get<std::string>());
    s.deterministic_only = j.value("deterministic_only", false);
    return s;
}

json annotation_core_json(const AnnotationVector &a)
{
    json j = json::object();
    json type = json::object();
    if (a.output_kind)
        type["kind"] = std::string(to_string(*a.output_kind));
    if (a.label) {
        type["label"] = *a.label;
        type["supertypes"] = a.supertypes;
    }
    if (a.key)
        type["key"] = *a.key;
    if (a.mapping)
        type["mapping"] = {{"name", a.mapping->name}, {"present", a.mapping->present}};
    if (a.undeclared_collection)
        type["undeclared"] = *a.undeclared_collection;
    if (!a.inputs.empty()) {
        json inputs = json::array();
        for (const auto &s : a.inputs)
            inputs.push_back(expectation_to_json(s));
        type["inputs"] = std::move(inputs);
    }
    if (!a.bins.empty())
        type["bins"] = a.bins;
    j["type_profile"] = std::move(type);

    json binding = json::object();
    for (const auto &[name, b] : a.binding)
        binding[name] = b == Binding::Bound ? "Bound" : "Unbound";
    j["binding"] = std::move(binding);

    json refsys = json::object();
    if (a.crs)
        refsys["crs"] = *a.crs;
    if (a.granularity)
        refsys["temporal_granularity"] = std::string(to_string(*a.granularity));
    if (a.units)
        refsys["units"] = *a.units;
    j["refsys"] = std::move(refsys);

    if (a.uncertainty) {
        if (a.uncertainty->deterministic())
            j["uncertainty"] = "Deterministic";
        else
            j["uncertainty"] = {{"EpsBounded", a.uncertainty->eps_label}, {"bin", a.uncertainty->eps_bin}};
    }
    if (a.tags)
        j["semantic_tags"] = *a.tags;
    return j;
}

}

std::string AnnotationVector::canonical_without_placement() const { return annotation_core_json(*this).dump(); }

std::string AnnotationVector::canonical() const { return annotation_to_json(*this).dump(); }

json annotation_to_json(const AnnotationVector &a)
{
    json j = annotation_core_json(a);
    j["placement"] = a.placement;
    return j;
}

AnnotationVector annotation_from_json(const json &j)
{
    AnnotationVector a;
    const json &type = j.at("type_profile");
    if (type.contains("kind"))
        a.output_kind = parse_data_kind(type["kind"].get<std::string>());
    if (type.contains("label")) {
        a.label = type["label"].get<std::string>();
        a.supertypes = type.value("supertypes", std::set<std::string>{});
    }
    if (type.contains("key"))
        a.key = type["key"].get<std::string>();
    if (type.contains("mapping"))
        a.mapping = MappingStatus{type["mapping"].at("name").get<std::string>(), type["mapping"].at("present").get<bool>()};
    if (type.contains("undeclared"))
        a.undeclared_collection = type["undeclared"].get<std::string>();
    if (type.contains("inputs"))
        for (const auto &s : type["inputs"])
            a.inputs.push_back(expectation_from_json(s));
    if (type.contains("bins"))
        a.bins = type["bins"].get<std::map<std::string, std::string>>();

    const json binding = j.value("binding", json::object());
    for (const auto &[name, b] : binding.items())
        a.binding[name] = b.get<std::string>() == "Bound" ? Binding::Bound : Binding::Unbound;

    const json refsys = j.value("refsys", json::object());
    if (refsys.contains("crs"))
        a.crs = refsys["crs"].get<std::string>();
    if (refsys.contains("temporal_granularity"))
        a.granularity = parse_granularity(refsys["temporal_granularity"].get<std::string>());
    if (refsys.contains("units"))
        a.units = refsys["units"].get<std::string>();

    if (j.contains("uncertainty")) {
        const json &u = j["uncertainty"];
        if (u.is_string())
            a.uncertainty = Uncertainty{};
        else
            a.uncertainty = Uncertainty{u.at("bin").get<int>(), u.at("EpsBounded").get<std::string>()};
    }
    if (j.contains("semantic_tags"))
        a.tags = j["semantic_tags"].get<std::set<std::string>>();
    if (j.contains("placement"))
        a.placement = j["placement"].get<std::set<std::string>>();
    return a;
}

}
