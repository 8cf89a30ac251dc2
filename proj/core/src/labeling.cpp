#include <ppf/labeling.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

namespace ppf {

using nlohmann::json;

std::size_t Labeling::count(NodeId n) const
{
    const auto &row = alive.at(static_cast<std::size_t>(n));
    return static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
}

std::size_t Labeling::total() const
{
    std::size_t t = 0;
    for (std::size_t n = 0; n < alive.size(); ++n)
        t += count(static_cast<NodeId>(n));
    return t;
}

namespace {

constexpr ConstraintFamily kUnaryFamilies[] = {ConstraintFamily::TYPE, ConstraintFamily::BOUND, ConstraintFamily::PLACE};
constexpr ConstraintFamily kEdgeFamilies[] = {ConstraintFamily::ALIGN, ConstraintFamily::CRS, ConstraintFamily::UNCERT,
                                              ConstraintFamily::TEMPORAL};

std::optional<Witness> unary_failure(const AnnotationVector &lambda, NodeId at)
{
    for (auto f : kUnaryFamilies)
        if (auto w = check_unary(f, lambda, at))
            return w;
    return std::nullopt;
}

/// Pairwise compatibility of a parent label with a child label at one input slot.
std::optional<Witness> edge_failure(const PPFNode &node, const AnnotationVector &lambda, std::size_t slot,
                                    const AnnotationVector &mu)
{
    DataKind want = node.op().kind().input_kinds.at(slot);
    if (mu.output_kind && *mu.output_kind != want) {
        Witness w;
        w.family = ConstraintFamily::TYPE;
        w.at_operator = node.id;
        w.slot = slot;
        w.evidence.push_back({"kind", std::string(to_string(want)), std::string(to_string(*mu.output_kind))});
        return w;
    }
    for (auto f : kEdgeFamilies)
        if (auto w = check_edge(f, lambda, slot, mu, node.id))
            return w;
    return std::nullopt;
}

std::vector<NodeId> sweep_order(const PackedPlanForest &forest, const LabelOptions &opts)
{
    if (!opts.order_seed)
        return forest.topological_order();
    std::mt19937_64 rng(*opts.order_seed);
    const std::size_t n = forest.size();
    std::vector<std::size_t> pending(n, 0);
    std::vector<std::vector<NodeId>> parents(n);
    for (const auto &node : forest.nodes) {
        std::set<NodeId> kids;
        for (const auto &d : node.derivations)
            kids.insert(d.begin(), d.end());
        pending[static_cast<std::size_t>(node.id)] = kids.size();
        for (NodeId c : kids)
            parents[static_cast<std::size_t>(c)].push_back(node.id);
    }
    std::vector<NodeId> ready, order;
    for (const auto &node : forest.nodes)
        if (pending[static_cast<std::size_t>(node.id)] == 0)
            ready.push_back(node.id);
    while (!ready.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, ready.size() - 1);
        std::size_t i = pick(rng);
        NodeId id = ready[i];
        ready[i] = ready.back();
        ready.pop_back();
        order.push_back(id);
        for (NodeId p : parents[static_cast<std::size_t>(id)])
            if (--pending[static_cast<std::size_t>(p)] == 0)
                ready.push_back(p);
    }
    return order;
}

}

Labeling label(const PackedPlanForest &forest, const Catalog &, const LabelOptions &opts)
{
    Labeling L;
    L.alive.resize(forest.size());
    L.supported.resize(forest.size());
    for (const auto &n : forest.nodes)
        L.alive[static_cast<std::size_t>(n.id)].assign(n.members.size(), true);
    L.mass.push_back(L.total());

    std::set<std::pair<NodeId, ConstraintFamily>> logged;
    auto log = [&](NodeId n, std::size_t label, const Witness &w) {
        if (logged.insert({n, w.family}).second)
            L.log.push_back({n, label, w});
    };

    const auto order = sweep_order(forest, opts);
    bool changed = true;
    while (changed) {
        changed = false;
        ++L.sweeps;
        for (NodeId id : order) {
            const PPFNode &node = forest.at(id);
            auto &row = L.alive[static_cast<std::size_t>(id)];
            std::set<std::size_t> supporting;
            for (std::size_t li = 0; li < node.members.size(); ++li) {
                if (!row[li])
                    continue;
                const AnnotationVector &lambda = node.members[li];
                std::optional<Witness> direct = unary_failure(lambda, id);
                bool survives = !direct;
                if (survives && !node.is_leaf()) {
                    survives = false;
                    for (std::size_t di = 0; di < node.derivations.size(); ++di) {
                        const auto &deriv = node.derivations[di];
                        bool all_slots = true;
                        for (std::size_t slot = 0; slot < deriv.size() && all_slots; ++slot) {
                            const PPFNode &child = forest.at(deriv[slot]);
                            const auto &crow = L.alive[static_cast<std::size_t>(child.id)];
                            bool some = false;
                            for (std::size_t mi = 0; mi < child.members.size() && !some; ++mi) {
                                if (!crow[mi])
                                    continue;
                                auto w = edge_failure(node, lambda, slot, child.members[mi]);
                                if (!w)
                                    some = true;
                                else if (!direct)
                                    direct = w;
                            }
                            all_slots = some;
                        }
                        if (all_slots) {
                            survives = true;
                            supporting.insert(di);
                        }
                    }
                }
                if (!survives) {
                    row[li] = false;
                    changed = true;
                    if (direct)
                        log(id, li, *direct);
                }
            }
            L.supported[static_cast<std::size_t>(id)].assign(supporting.begin(), supporting.end());
        }
        L.mass.push_back(L.total());
    }
    return L;
}

/*======================================================================================================================
 * Verdict and extraction
 *====================================================================================================================*/

namespace {

void check_matches(const PackedPlanForest &forest, const Labeling &labels)
{
    if (labels.alive.size() != forest.size() || labels.supported.size() != forest.size())
        throw std::invalid_argument("labels do not belong to this forest (node count differs)");
    for (const auto &n : forest.nodes)
        if (labels.alive[static_cast<std::size_t>(n.id)].size() != n.members.size())
            throw std::invalid_argument("labels do not belong to this forest (node " + std::to_string(n.id) + ")");
}

std::set<NodeId> reachable(const PackedPlanForest &forest, NodeId root)
{
    std::set<NodeId> seen;
    std::vector<NodeId> stack{root};
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        if (!seen.insert(id).second)
            continue;
        for (const auto &d : forest.at(id).derivations)
            for (NodeId c : d)
                stack.push_back(c);
    }
    return seen;
}

}

Plan derivation_plan(const PackedPlanForest &forest, NodeId from, std::size_t derivation)
{
    Plan plan;
    std::vector<NodeId> stack{from};
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        if (plan.contains(id))
            continue;
        const PPFNode &n = forest.at(id);
        PlanNode pn;
        pn.id = id;
        pn.payload = n.payload;
        if (!n.is_leaf())
            pn.children = n.derivations.at(id == from ? derivation : 0);
        for (NodeId c : pn.children)
            stack.push_back(c);
        plan.nodes[id] = std::move(pn);
    }
    plan.roots = {from};
    return plan;
}

FeasibilityVerdict is_feasible(const PackedPlanForest &forest, const Labeling &labels, const Catalog &catalog)
{
    check_matches(forest, labels);
    FeasibilityVerdict verdict;
    std::set<std::string> seen;
    for (NodeId root : forest.roots) {
        if (!labels.empty(root))
            continue;
        verdict.feasible = false;
        verdict.infeasible_roots.push_back(root);
        auto below = reachable(forest, root);
        for (const auto &entry : labels.log) {
            if (!below.contains(entry.node) || !labels.empty(entry.node))
                continue;
            // Classes agree on every facet below a node, so only the failing node's own derivation matters: take
            // the first one on which the failure reproduces.
            const PPFNode &failing = forest.at(entry.node);
            const std::size_t options = failing.is_leaf() ? 1 : failing.derivations.size();
            std::optional<Witness> w;
            Plan plan;
            for (std::size_t d = 0; d < options && !w; ++d) {
                plan = derivation_plan(forest, entry.node, d);
                auto anns = annotate_plan(plan, catalog);
                std::vector<const AnnotationVector *> kids;
                for (NodeId c : plan.at(entry.node).children)
                    kids.push_back(&anns.at(c));
                const PlanNode &pn = plan.at(entry.node);
                w = pn.is_leaf() ? check_local(anns.at(entry.node), kids, entry.node)
                                 : check_local(pn.op(), anns.at(entry.node), kids, entry.node);
            }
            if (!w) {
                plan = derivation_plan(forest, entry.node, 0);
                w = entry.witness;
            }
            Certificate cert = minimal_certificate(plan, *w, catalog);
            std::string fp = certificate_to_json(cert).dump();
            if (seen.insert(fp).second)
                verdict.certificates.push_back(std::move(cert));
        }
    }
    return verdict;
}

UnpackResult extract_feasible(const PackedPlanForest &forest, const Labeling &labels, std::optional<std::size_t> limit)
{
    check_matches(forest, labels);
    PackedPlanForest live = forest;
    live.roots.clear();
    for (NodeId r : forest.roots)
        if (!labels.empty(r))
            live.roots.push_back(r);
    return unpack(live, limit, [&](NodeId id) -> std::vector<std::size_t> {
        if (labels.empty(id))
            return {};
        if (forest.at(id).is_leaf())
            return {0};
        return labels.supported[static_cast<std::size_t>(id)];
    });
}

json verdict_to_json(const FeasibilityVerdict &verdict, const PackedPlanForest &forest, const Labeling &labels)
{
    json certs = json::array();
    for (const auto &c : verdict.certificates)
        certs.push_back(certificate_to_json(c));
    json counts = json::array();
    for (const auto &n : forest.nodes)
        counts.push_back({{"node", n.id}, {"alive", labels.count(n.id)}, {"total", n.members.size()}});
    json log = json::array();
    for (const auto &e : labels.log)
        log.push_back({{"node", e.node}, {"label", e.label}, {"family", std::string(to_string(e.witness.family))},
                       {"explanation", describe(e.witness)}});
    return {{"verdict", verdict.feasible ? "Feasible" : "Infeasible"},
            {"infeasible_roots", verdict.infeasible_roots},
            {"certificates", std::move(certs)},
            {"label_counts", std::move(counts)},
            {"pruned_label_log", std::move(log)},
            {"sweeps", labels.sweeps}};
}

}
