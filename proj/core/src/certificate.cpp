#include "internal.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace ppf {

using nlohmann::json;

std::set<NodeId> detail::reachable_within(const Plan &plan, NodeId sink, const std::set<NodeId> &members)
{
    std::set<NodeId> seen;
    if (!members.contains(sink))
        return seen;
    std::vector<NodeId> stack{sink};
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        if (!seen.insert(id).second)
            continue;
        for (NodeId c : plan.at(id).children)
            if (c != kNoNode && members.contains(c) && !seen.contains(c))
                stack.push_back(c);
    }
    return seen;
}

bool reproduces(const Plan &plan, const std::set<NodeId> &members, const Witness &witness, const Catalog &catalog)
{
    if (!members.contains(witness.at_operator))
        return false;
    auto anns = annotate_plan(plan, catalog, &members);
    auto w = detail::recheck(plan, anns, witness);
    return w && *w == witness;
}

Certificate minimal_certificate(const Plan &input, const Witness &witness, const Catalog &catalog)
{
    Plan plan = input;
    bind_leaf_kinds(plan, catalog);
    const NodeId sink = witness.at_operator;
    auto below = plan.descendants(sink);
    std::set<NodeId> members(below.begin(), below.end());

    // Deletion-based shrinking: drop a node (and whatever it disconnects from the sink) while the witness survives.
    // One pass suffices because reproduction is monotone in the member set, but a second pass guards the fixed point.
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<NodeId> order(members.begin(), members.end());
        for (NodeId candidate : order) {
            if (candidate == sink || !members.contains(candidate))
                continue;
            std::set<NodeId> trial = members;
            trial.erase(candidate);
            trial = detail::reachable_within(plan, sink, trial);
            if (reproduces(plan, trial, witness, catalog)) {
                members = std::move(trial);
                changed = true;
            }
        }
    }

    Certificate cert;
    cert.subplan.assign(members.begin(), members.end());
    cert.operator_id = sink;
    cert.family = witness.family;
    cert.witness = witness;
    cert.minimal = !(members.size() == plan.nodes.size() && members.size() > 1);
    return cert;
}

Verification verify_certificate(const Certificate &cert, const Plan &input, const Catalog &catalog)
{
    for (NodeId id : cert.subplan)
        if (!input.contains(id))
            return {false, "dangling node id " + std::to_string(id)};
    std::set<NodeId> members(cert.subplan.begin(), cert.subplan.end());
    if (members.size() != cert.subplan.size())
        return {false, "duplicate node ids in subplan"};
    if (!members.contains(cert.operator_id))
        return {false, "operator is not part of the subplan"};
    if (cert.witness.at_operator != cert.operator_id)
        return {false, "witness names a different operator"};
    if (cert.witness.family != cert.family)
        return {false, "witness family differs from certificate family"};
    if (cert.witness.evidence.empty() || cert.witness.evidence.size() > Witness::kMaxEvidence)
        return {false, "evidence must hold 1 to 4 entries"};

    Plan plan = input;
    bind_leaf_kinds(plan, catalog);
    if (detail::reachable_within(plan, cert.operator_id, members) != members)
        return {false, "operator is not the unique sink of the subplan"};
    if (!reproduces(plan, members, cert.witness, catalog))
        return {false, "re-annotating the subplan does not reproduce the witness"};
    for (NodeId id : members) {
        if (id == cert.operator_id)
            continue;
        std::set<NodeId> trial = members;
        trial.erase(id);
        trial = detail::reachable_within(plan, cert.operator_id, trial);
        if (reproduces(plan, trial, cert.witness, catalog))
            return {false, "not minimal: node " + std::to_string(id) + " can be removed"};
    }
    return {true, {}};
}

json witness_to_json(const Witness &w)
{
    json evidence = json::array();
    for (const auto &e : w.evidence)
        evidence.push_back(json::array({e.facet, e.expected, e.actual}));
    json j{{"family", std::string(to_string(w.family))}, {"operator", w.at_operator}, {"evidence", std::move(evidence)}};
    if (w.slot)
        j["slot"] = *w.slot;
    return j;
}

namespace {

std::vector<Evidence> evidence_from_json(const json &arr)
{
    std::vector<Evidence> out;
    for (const auto &e : arr) {
        if (!e.is_array() || e.size() != 3)
            throw ParseError(0, "witness", "evidence entries are [facet, expected, actual]");
        out.push_back({e[0].get<std::string>(), e[1].get<std::string>(), e[2].get<std::string>()});
    }
    return out;
}

ConstraintFamily family_from_json(const json &j)
{
    auto f = parse_family(j.get<std::string>());
    if (!f)
        throw ParseError(0, "family", "unknown constraint family '" + j.get<std::string>() + "'");
    return *f;
}

}

Witness witness_from_json(const json &doc)
{
    Witness w;
    w.family = family_from_json(doc.at("family"));
    w.at_operator = doc.at("operator").get<NodeId>();
    w.evidence = evidence_from_json(doc.at("evidence"));
    if (doc.contains("slot"))
        w.slot = doc["slot"].get<std::size_t>();
    return w;
}

json certificate_to_json(const Certificate &c)
{
    json evidence = json::array();
    for (const auto &e : c.witness.evidence)
        evidence.push_back(json::array({e.facet, e.expected, e.actual}));
    json j{{"subplan", c.subplan},
           {"operator", c.operator_id},
           {"family", std::string(to_string(c.family))},
           {"witness", std::move(evidence)},
           {"message", c.message()},
           {"minimal", c.minimal}};
    if (c.witness.slot)
        j["slot"] = *c.witness.slot;
    if (c.plan_index)
        j["plan_index"] = *c.plan_index;
    return j;
}

Certificate certificate_from_json(const json &doc)
{
    Certificate c;
    c.subplan = doc.at("subplan").get<std::vector<NodeId>>();
    c.operator_id = doc.at("operator").get<NodeId>();
    c.family = family_from_json(doc.at("family"));
    c.witness.family = c.family;
    c.witness.at_operator = c.operator_id;
    c.witness.evidence = evidence_from_json(doc.at("witness"));
    if (doc.contains("slot"))
        c.witness.slot = doc["slot"].get<std::size_t>();
    c.minimal = doc.value("minimal", true);
    if (doc.contains("plan_index"))
        c.plan_index = doc["plan_index"].get<std::size_t>();
    return c;
}

}
