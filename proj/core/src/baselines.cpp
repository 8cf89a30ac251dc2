#include <ppf/bench.hpp>

#include <chrono>
#include <map>

namespace ppf {

std::string normalized_plan_text(const Plan &plan) { return serialize_plan(hash_cons(plan)); }

NaiveReport baseline_naive(const std::vector<Plan> &candidates, const Catalog &catalog)
{
    const auto t0 = std::chrono::steady_clock::now();
    NaiveReport r;
    for (const Plan &p : candidates) {
        r.total_nodes += p.nodes.size();
        for (const auto &[_, n] : p.nodes)
            if (!n.is_leaf())
                ++r.total_operator_instances;
        if (check_plan(p, catalog).empty()) {
            ++r.feasible_plans;
            Plan bound = p;
            bind_leaf_kinds(bound, catalog);
            r.feasible_set.insert(normalized_plan_text(bound));
        }
    }
    r.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

MemoReport baseline_memo_no_annotations(const std::vector<Plan> &candidates, const Catalog &catalog)
{
    // memo key → structural hash → annotation-aware key of that structure (first one seen is the representative)
    struct Group
    {
        std::uint64_t representative = 0;
        std::string representative_key;
        std::map<std::uint64_t, std::string> structures;
    };
    std::map<std::string, Group> groups;

    for (const Plan &p : candidates) {
        const auto hashes = structural_hashes(p);
        const auto anns = annotate_plan(p, catalog);
        for (const auto &[id, n] : p.nodes) {
            if (n.is_leaf())
                continue;
            std::string key(to_string(n.op().symbol));
            for (NodeId c : n.children) {
                auto kind = p.at(c).output_kind();
                key += '|';
                key += kind ? std::string(to_string(*kind)) : "?";
            }
            key += '|' + n.op().canonical_params();
            const std::uint64_t h = hashes.at(id);
            Group &g = groups[key];
            if (g.structures.empty()) {
                g.representative = h;
                g.representative_key = forest_key(n.payload, anns.at(id));
            }
            g.structures.emplace(h, forest_key(n.payload, anns.at(id)));
        }
    }

    MemoReport r;
    for (const auto &[_, g] : groups)
        for (const auto &[h, k] : g.structures) {
            if (h == g.representative)
                continue;
            ++r.memo_merges;
            if (k != g.representative_key)
                ++r.incorrect_merges;
        }
    r.incorrect_pct = r.memo_merges ? 100.0 * static_cast<double>(r.incorrect_merges) / static_cast<double>(r.memo_merges) : 0.0;
    return r;
}

BaselineReport compare_baselines(const AmbiguousQuerySpec &spec, const Catalog &catalog, std::optional<std::size_t> limit)
{
    std::vector<Plan> plans;
    for (auto &c : expand(spec, limit))
        plans.push_back(std::move(c.plan));
    BaselineReport r;
    r.naive = baseline_naive(plans, catalog);
    r.memo_no_ann = baseline_memo_no_annotations(plans, catalog);
    BuildOptions opts;
    opts.limit = limit;
    std::size_t k = 1;
    for (const auto &cp : spec.choice_points)
        k = std::max(k, cp.alternatives.size());
    opts.alternatives = k;
    r.ppf = build(plans, catalog, opts).stats;
    return r;
}

}
