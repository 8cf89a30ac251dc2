#include <ppf/ambiguity.hpp>

#include <nlohmann/json.hpp>

#include <limits>

namespace ppf {

using nlohmann::json;

std::string_view to_string(Dimension d)
{
    switch (d) {
        case Dimension::AttachmentScope: return "AttachmentScope";
        case Dimension::PredicateInterpretation: return "PredicateInterpretation";
        case Dimension::OperatorAlternative: return "OperatorAlternative";
    }
    return "?";
}

std::optional<Dimension> parse_dimension(std::string_view text)
{
    for (auto d : {Dimension::AttachmentScope, Dimension::PredicateInterpretation, Dimension::OperatorAlternative})
        if (to_string(d) == text)
            return d;
    return std::nullopt;
}

SpecError::SpecError(std::string choice_point, const std::string &message)
    : std::runtime_error("choice point '" + choice_point + "': " + message), choice_point(std::move(choice_point))
{ }

std::size_t AmbiguousQuerySpec::num_candidates() const
{
    std::size_t total = 1;
    for (const auto &cp : choice_points) {
        std::size_t k = cp.alternatives.size();
        if (k != 0 && total > std::numeric_limits<std::size_t>::max() / k)
            return std::numeric_limits<std::size_t>::max();
        total *= k;
    }
    return total;
}

NodeId AmbiguousQuerySpec::fragment_base(std::size_t index) const
{
    NodeId base = skeleton.max_id() + 1;
    for (std::size_t i = 0; i < index && i < choice_points.size(); ++i) {
        NodeId span = 0;
        for (const auto &alt : choice_points[i].alternatives)
            span = std::max(span, alt.fragment.max_id() + 1);
        base += span;
    }
    return base;
}

namespace {

bool is_site_leaf(const PlanNode &n) { return n.is_leaf() && n.leaf().collection == "@site"; }

}

void validate_spec(const AmbiguousQuerySpec &spec)
{
    for (std::size_t i = 0; i < spec.choice_points.size(); ++i) {
        const ChoicePoint &cp = spec.choice_points[i];
        if (cp.alternatives.empty())
            throw SpecError(cp.predicate, "needs at least one alternative");
        for (std::size_t a = 0; a < cp.alternatives.size(); ++a) {
            const Alternative &alt = cp.alternatives[a];
            const std::string where = "alternative '" + alt.label + "': ";
            SiteRef site = cp.site_of(a);
            if (!spec.skeleton.contains(site.node))
                throw SpecError(cp.predicate, where + "site node " + std::to_string(site.node) + " is not in the skeleton");
            const PlanNode &parent = spec.skeleton.at(site.node);
            if (parent.is_leaf() || site.slot >= parent.children.size())
                throw SpecError(cp.predicate, where + "site node " + std::to_string(site.node) + " has no slot " +
                                                  std::to_string(site.slot));
            if (alt.fragment.roots.size() != 1)
                throw SpecError(cp.predicate, where + "fragment must have exactly one root");
            const PlanNode &root = alt.fragment.at(alt.fragment.roots.front());
            DataKind want = parent.op().kind().input_kinds[site.slot];
            if (!is_site_leaf(root)) {
                if (auto got = root.output_kind(); got && *got != want)
                    throw SpecError(cp.predicate, where + "fragment produces " + std::string(to_string(*got)) +
                                                      " but the site expects " + std::string(to_string(want)));
            }
            bool uses_site = false;
            for (const auto &[_, n] : alt.fragment.nodes)
                uses_site = uses_site || is_site_leaf(n);
            if (uses_site && parent.children[site.slot] == kNoNode) {
                // Earlier choice points may fill an open slot; only reject when none can.
                bool filled = false;
                for (std::size_t j = 0; j < i; ++j)
                    for (std::size_t b = 0; b < spec.choice_points[j].alternatives.size(); ++b)
                        filled = filled || spec.choice_points[j].site_of(b) == site;
                if (!filled)
                    throw SpecError(cp.predicate, where + "'@site' refers to an open slot");
            }
        }
    }
}

Plan splice(const AmbiguousQuerySpec &spec, const std::vector<std::size_t> &choice)
{
    Plan plan = spec.skeleton;
    for (std::size_t i = 0; i < spec.choice_points.size(); ++i) {
        const ChoicePoint &cp = spec.choice_points[i];
        const std::size_t a = choice.at(i);
        const Alternative &alt = cp.alternatives.at(a);
        const SiteRef site = cp.site_of(a);
        const NodeId base = spec.fragment_base(i);
        const NodeId current = plan.at(site.node).children.at(site.slot);

        auto remap = [&](NodeId local) -> NodeId {
            if (is_site_leaf(alt.fragment.at(local))) {
                if (current == kNoNode)
                    throw SpecError(cp.predicate, "'@site' refers to an open slot");
                return current;
            }
            return base + local;
        };
        for (const auto &[local, node] : alt.fragment.nodes) {
            if (is_site_leaf(node))
                continue;
            PlanNode copy = node;
            copy.id = base + local;
            for (NodeId &c : copy.children)
                c = remap(c);
            plan.nodes[copy.id] = std::move(copy);
        }
        plan.at(site.node).children[site.slot] = remap(alt.fragment.roots.front());
    }
    prune_unreachable(plan);
    return plan;
}

PlanExpander::PlanExpander(const AmbiguousQuerySpec &spec, std::optional<std::size_t> limit)
    : spec_(spec), limit_(limit), odometer_(spec.choice_points.size(), 0)
{
    for (const auto &cp : spec.choice_points)
        if (cp.alternatives.empty())
            done_ = true;
}

std::optional<Candidate> PlanExpander::next()
{
    if (done_ || (limit_ && yielded_ >= *limit_))
        return std::nullopt;
    Candidate c;
    c.index = yielded_;
    c.choice = odometer_;
    c.plan = splice(spec_, odometer_);
    c.report = validate_signature(c.plan);
    ++yielded_;

    // advance, last position fastest
    std::size_t i = odometer_.size();
    while (i > 0) {
        --i;
        if (++odometer_[i] < spec_.choice_points[i].alternatives.size())
            return c;
        odometer_[i] = 0;
    }
    done_ = true;
    return c;
}

std::vector<Candidate> expand(const AmbiguousQuerySpec &spec, std::optional<std::size_t> limit)
{
    std::vector<Candidate> out;
    PlanExpander it(spec, limit);
    while (auto c = it.next())
        out.push_back(std::move(*c));
    return out;
}

std::vector<SiteDescriptor> attachment_variants(const AmbiguousQuerySpec &spec, const std::string &predicate_id)
{
    std::vector<SiteDescriptor> out;
    bool found = false;
    for (const auto &cp : spec.choice_points) {
        if (cp.predicate != predicate_id)
            continue;
        found = true;
        for (std::size_t a = 0; a < cp.alternatives.size(); ++a)
            out.push_back({cp.alternatives[a].label, cp.site_of(a), a});
    }
    if (!found)
        throw SpecError(predicate_id, "unknown predicate");
    return out;
}

/*======================================================================================================================
 * Spec documents
 *====================================================================================================================*/

namespace {

Plan plan_field(const json &value, const PlanParseOptions &opts, const std::string &where)
{
    try {
        if (value.is_string())
            return load_plan(value.get<std::string>(), opts);
        if (value.is_array()) {
            std::string text;
            for (const auto &line : value)
                text += line.get<std::string>() + "\n";
            return load_plan(text, opts);
        }
        return plan_from_json(value, opts);
    } catch (const ParseError &e) {
        throw ParseError(e.line, where + (e.field.empty() ? "" : "." + e.field), e.what());
    }
}

SiteRef site_from_json(const json &j) { return {j.at("node").get<NodeId>(), j.value("slot", std::size_t{0})}; }

json site_to_json(const SiteRef &s) { return {{"node", s.node}, {"slot", s.slot}}; }

}

AmbiguousQuerySpec spec_from_json(const json &doc)
{
    if (!doc.is_object() || !doc.contains("skeleton"))
        throw ParseError(0, "skeleton", "spec document needs a 'skeleton'");
    AmbiguousQuerySpec spec;
    spec.skeleton = plan_field(doc["skeleton"], {.allow_open_slots = true}, "skeleton");
    std::size_t index = 0;
    for (const auto &j : doc.value("choice_points", json::array())) {
        const std::string where = "choice_points[" + std::to_string(index++) + "]";
        ChoicePoint cp;
        cp.predicate = j.value("predicate", where);
        auto dim = parse_dimension(j.value("dimension", "OperatorAlternative"));
        if (!dim)
            throw ParseError(0, where + ".dimension", "unknown dimension");
        cp.dimension = *dim;
        if (!j.contains("site"))
            throw ParseError(0, where + ".site", "missing site");
        cp.site = site_from_json(j["site"]);
        std::size_t ai = 0;
        for (const auto &aj : j.value("alternatives", json::array())) {
            const std::string awhere = where + ".alternatives[" + std::to_string(ai++) + "]";
            Alternative alt;
            alt.label = aj.value("label", awhere);
            if (aj.contains("site"))
                alt.site = site_from_json(aj["site"]);
            if (!aj.contains("fragment"))
                throw ParseError(0, awhere + ".fragment", "missing fragment");
            alt.fragment = plan_field(aj["fragment"], {.allow_site_leaf = true}, awhere + ".fragment");
            cp.alternatives.push_back(std::move(alt));
        }
        spec.choice_points.push_back(std::move(cp));
    }
    validate_spec(spec);
    return spec;
}

json spec_to_json(const AmbiguousQuerySpec &spec)
{
    json cps = json::array();
    for (const auto &cp : spec.choice_points) {
        json alts = json::array();
        for (const auto &alt : cp.alternatives) {
            json a{{"label", alt.label}, {"fragment", write_plan(alt.fragment)}};
            if (alt.site)
                a["site"] = site_to_json(*alt.site);
            alts.push_back(std::move(a));
        }
        cps.push_back({{"predicate", cp.predicate},
                       {"dimension", std::string(to_string(cp.dimension))},
                       {"site", site_to_json(cp.site)},
                       {"alternatives", std::move(alts)}});
    }
    return {{"skeleton", write_plan(spec.skeleton)}, {"choice_points", std::move(cps)}};
}

AmbiguousQuerySpec load_spec(std::string_view content)
{
    auto first = content.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && content[first] == '{') {
        json doc;
        try {
            doc = json::parse(content);
        } catch (const json::parse_error &e) {
            throw ParseError(0, "json", e.what());
        }
        if (doc.contains("skeleton"))
            return spec_from_json(doc);
        return AmbiguousQuerySpec{plan_from_json(doc), {}};
    }
    return AmbiguousQuerySpec{parse_plan(content), {}};
}

}
