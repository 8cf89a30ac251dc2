#include "internal.hpp"

#include <algorithm>
#include <sstream>

namespace ppf {

std::string_view to_string(ConstraintFamily f)
{
    switch (f) {
        case ConstraintFamily::TYPE: return "TYPE";
        case ConstraintFamily::BOUND: return "BOUND";
        case ConstraintFamily::ALIGN: return "ALIGN";
        case ConstraintFamily::CRS: return "CRS";
        case ConstraintFamily::PLACE: return "PLACE";
        case ConstraintFamily::UNCERT: return "UNCERT";
        case ConstraintFamily::TEMPORAL: return "TEMPORAL";
    }
    return "?";
}

std::optional<ConstraintFamily> parse_family(std::string_view text)
{
    for (auto f : kFamilyOrder)
        if (to_string(f) == text)
            return f;
    return std::nullopt;
}

bool is_edge_family(ConstraintFamily f)
{
    return f == ConstraintFamily::ALIGN || f == ConstraintFamily::CRS || f == ConstraintFamily::UNCERT ||
           f == ConstraintFamily::TEMPORAL;
}

namespace {

std::string join_set(const std::set<std::string> &items)
{
    std::string out;
    for (const auto &s : items) {
        if (!out.empty())
            out += '|';
        out += s;
    }
    return out;
}

std::string evidence_value(const Witness &w, std::string_view facet, bool expected)
{
    for (const auto &e : w.evidence)
        if (e.facet == facet)
            return expected ? e.expected : e.actual;
    return {};
}

Witness make_witness(ConstraintFamily family, NodeId at, std::optional<std::size_t> slot, std::vector<Evidence> ev)
{
    Witness w;
    w.family = family;
    w.at_operator = at;
    w.slot = slot;
    w.evidence = std::move(ev);
    return w;
}

}

std::string describe(const Witness &w)
{
    std::ostringstream out;
    const auto &ev = w.evidence;
    auto first = ev.empty() ? Evidence{} : ev.front();
    switch (w.family) {
        case ConstraintFamily::TYPE:
            if (first.facet == "mapping")
                out << "Type infeasible: the catalog lacks the mapping " << first.expected;
            else if (first.facet == "kind")
                out << "Type infeasible: input " << w.slot.value_or(0) << " delivers " << first.actual << " but "
                    << first.expected << " is required";
            else
                out << "Type infeasible: " << first.actual << " is not declared in the catalog";
            break;
        case ConstraintFamily::BOUND:
            out << "Binding infeasible: parameter " << first.expected << " is " << first.actual;
            break;
        case ConstraintFamily::ALIGN:
            if (first.facet == "domain")
                out << "Embedding domain mismatch: query vector " << evidence_value(w, "query", true) << " ranks "
                    << first.expected << " but the input carries " << first.actual;
            else
                out << "Traversal infeasible: input nodes typed as " << first.actual << ", but edge "
                    << evidence_value(w, "edge", true) << " expects " << first.expected;
            break;
        case ConstraintFamily::CRS:
            out << "CRS mismatch: input " << w.slot.value_or(0) << " is in " << first.actual << " but "
                << first.expected << " is required";
            break;
        case ConstraintFamily::PLACE:
            out << "Placement infeasible: no engine can host the operator";
            break;
        case ConstraintFamily::UNCERT:
            out << "Uncertainty mismatch: a deterministic-only operator receives " << first.actual << " input";
            break;
        case ConstraintFamily::TEMPORAL:
            out << "Temporal granularity mismatch: " << first.actual << " input where " << first.expected
                << " is required";
            break;
    }
    return out.str();
}

std::optional<Witness> check_edge(ConstraintFamily family, const AnnotationVector &ann, std::size_t slot,
                                  const AnnotationVector &child, NodeId at)
{
    if (slot >= ann.inputs.size())
        return std::nullopt;
    const SlotExpectation &want = ann.inputs[slot];
    switch (family) {
        case ConstraintFamily::ALIGN: {
            if (!want.accepted || !child.label)
                return std::nullopt;
            if (want.align == SlotExpectation::Align::Embedding) {
                if (want.accepted->contains(*child.label))
                    return std::nullopt;
                return make_witness(family, at, slot,
                                    {{"domain", join_set(*want.accepted), *child.label}, {"query", want.align_source, ""}});
            }
            const auto &sup = child.supertypes.empty() ? std::set<std::string>{*child.label} : child.supertypes;
            for (const auto &s : *want.accepted)
                if (sup.contains(s))
                    return std::nullopt;
            return make_witness(family, at, slot,
                                {{"label", join_set(*want.accepted), *child.label}, {"edge", want.align_source, ""}});
        }
        case ConstraintFamily::CRS:
            if (!want.crs || !child.crs || *want.crs == *child.crs)
                return std::nullopt;
            return make_witness(family, at, slot, {{"crs", *want.crs, *child.crs}});
        case ConstraintFamily::UNCERT:
            if (!want.deterministic_only || !child.uncertainty || child.uncertainty->deterministic())
                return std::nullopt;
            return make_witness(family, at, slot, {{"uncertainty", "Deterministic", "EpsBounded"}});
        case ConstraintFamily::TEMPORAL:
            if (!want.granularity || !child.granularity || *want.granularity == *child.granularity)
                return std::nullopt;
            return make_witness(family, at, slot,
                                {{"granularity", std::string(to_string(*want.granularity)),
                                  std::string(to_string(*child.granularity))}});
        default:
            return std::nullopt;
    }
}

std::optional<Witness> check_unary(ConstraintFamily family, const AnnotationVector &ann, NodeId at)
{
    switch (family) {
        case ConstraintFamily::TYPE:
            if (ann.undeclared_collection)
                return make_witness(family, at, std::nullopt, {{"collection", "declared", *ann.undeclared_collection}});
            if (ann.mapping && !ann.mapping->present)
                return make_witness(family, at, std::nullopt, {{"mapping", ann.mapping->name, "absent"}});
            return std::nullopt;
        case ConstraintFamily::BOUND:
            for (const auto &[name, b] : ann.binding)
                if (b == Binding::Unbound)
                    return make_witness(family, at, std::nullopt, {{"param", name, "Unbound"}});
            return std::nullopt;
        case ConstraintFamily::PLACE:
            if (ann.placement.empty())
                return make_witness(family, at, std::nullopt, {{"placement", "engine supporting operator", "none"}});
            return std::nullopt;
        default:
            return std::nullopt;
    }
}

namespace {

const AnnotationVector & opaque_ref()
{
    static const AnnotationVector value = opaque_annotation();
    return value;
}

std::optional<Witness> check_signature(const OperatorInstance &op, std::span<const AnnotationVector *const> children,
                                       NodeId at)
{
    const auto &kinds = op.kind().input_kinds;
    for (std::size_t i = 0; i < kinds.size() && i < children.size(); ++i) {
        if (!children[i] || !children[i]->output_kind || *children[i]->output_kind == kinds[i])
            continue;
        return make_witness(ConstraintFamily::TYPE, at, i,
                            {{"kind", std::string(to_string(kinds[i])),
                              std::string(to_string(*children[i]->output_kind))}});
    }
    return std::nullopt;
}

std::optional<Witness> check_family(const OperatorInstance *op, const AnnotationVector &ann,
                                    std::span<const AnnotationVector *const> children, ConstraintFamily f, NodeId at)
{
    if (f == ConstraintFamily::TYPE && op)
        if (auto w = check_signature(*op, children, at))
            return w;
    if (!is_edge_family(f))
        return check_unary(f, ann, at);
    for (std::size_t slot = 0; slot < ann.inputs.size(); ++slot) {
        const AnnotationVector &child = slot < children.size() && children[slot] ? *children[slot] : opaque_ref();
        if (auto w = check_edge(f, ann, slot, child, at))
            return w;
    }
    return std::nullopt;
}

}

std::optional<Witness> check_local(const AnnotationVector &ann, std::span<const AnnotationVector *const> children,
                                   NodeId at)
{
    for (auto f : kFamilyOrder)
        if (auto w = check_family(nullptr, ann, children, f, at))
            return w;
    return std::nullopt;
}

std::optional<Witness> check_local(const OperatorInstance &op, const AnnotationVector &ann,
                                   std::span<const AnnotationVector *const> children, NodeId at)
{
    for (auto f : kFamilyOrder)
        if (auto w = check_family(&op, ann, children, f, at))
            return w;
    return std::nullopt;
}

std::optional<Witness> detail::recheck(const Plan &plan, const std::map<NodeId, AnnotationVector> &anns, const Witness &w)
{
    auto it = anns.find(w.at_operator);
    if (it == anns.end())
        return std::nullopt;
    const PlanNode &node = plan.at(w.at_operator);
    std::vector<const AnnotationVector *> kids;
    for (NodeId c : node.children) {
        auto ci = anns.find(c);
        kids.push_back(ci == anns.end() ? nullptr : &ci->second);
    }
    const OperatorInstance *op = node.is_leaf() ? nullptr : &node.op();
    return check_family(op, it->second, kids, w.family, w.at_operator);
}

std::vector<Witness> check_plan(const Plan &input, const Catalog &catalog)
{
    Plan plan = input;
    bind_leaf_kinds(plan, catalog);
    auto anns = annotate_plan(plan, catalog);
    std::vector<Witness> out;
    std::set<NodeId> failed;
    for (NodeId id : topological_order(plan)) {
        const PlanNode &node = plan.at(id);
        if (std::any_of(node.children.begin(), node.children.end(), [&](NodeId c) { return failed.contains(c); })) {
            failed.insert(id);
            continue;
        }
        std::vector<const AnnotationVector *> kids;
        for (NodeId c : node.children)
            kids.push_back(anns.contains(c) ? &anns.at(c) : nullptr);
        std::optional<Witness> w = node.is_leaf() ? check_local(anns.at(id), kids, id)
                                                  : check_local(node.op(), anns.at(id), kids, id);
        if (w) {
            failed.insert(id);
            out.push_back(std::move(*w));
        }
    }
    return out;
}

/*======================================================================================================================
 * CRS repair
 *====================================================================================================================*/

Plan repair_crs(const Plan &input, const Catalog &catalog)
{
    Plan plan = input;
    bind_leaf_kinds(plan, catalog);
    for (NodeId id : topological_order(input)) {
        const PlanNode &node = plan.at(id);
        if (node.is_leaf() || node.op().symbol != Symbol::SpatialJoin)
            continue;
        auto anns = annotate_plan(plan, catalog);
        const auto &left = anns.at(node.children[0]);
        const auto &right = anns.at(node.children[1]);
        if (!left.crs || !right.crs || *left.crs == *right.crs)
            continue;
        if (!catalog.transforms.contains({*left.crs, *right.crs}))
            continue;
        NodeId fresh = plan.max_id() + 1;
        NodeId left_id = node.children[0];
        plan.add_op(fresh, make_op(Symbol::Reproject, {{"from", *left.crs}, {"to", *right.crs}}), {left_id});
        plan.at(id).children[0] = fresh;
    }
    // Leaf kinds stay as the caller wrote them.
    for (auto &[id, node] : plan.nodes)
        if (node.is_leaf() && input.contains(id))
            node.payload = input.at(id).payload;
    return plan;
}

}
