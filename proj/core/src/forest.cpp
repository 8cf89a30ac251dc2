#include <ppf/forest.hpp>
#include <ppf/hash.hpp>

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <queue>
#include <set>
#include <unordered_set>

namespace ppf {

std::string forest_key(const std::variant<LeafRef, OperatorInstance> &payload, const AnnotationVector &ann)
{
    std::string key;
    if (const auto *leaf = std::get_if<LeafRef>(&payload)) {
        key = "leaf|" + leaf->collection;
    } else {
        const auto &op = std::get<OperatorInstance>(payload);
        key = std::string(op.kind().name) + "|" + op.canonical_params();
    }
    key += "|";
    key += ann.canonical_without_placement();
    return key;
}

namespace {

std::set<std::string> intersect(const std::set<std::string> &a, const std::set<std::string> &b)
{
    std::set<std::string> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
    return out;
}

long peak_rss_kb()
{
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    return usage.ru_maxrss;
}

}

/*======================================================================================================================
 * PackedPlanForest
 *====================================================================================================================*/

NodeId PackedPlanForest::lookup_or_create(const std::variant<LeafRef, OperatorInstance> &payload,
                                          const AnnotationVector &ann, const std::vector<NodeId> &children)
{
    std::string key = forest_key(payload, ann);
    auto &bucket = index_[key];
    PPFNode *target = nullptr;
    for (NodeId id : bucket) {
        PPFNode &candidate = nodes[static_cast<std::size_t>(id)];
        auto common = intersect(candidate.annotation.placement, ann.placement);
        if (!common.empty() || (candidate.annotation.placement.empty() && ann.placement.empty())) {
            candidate.annotation.placement = std::move(common);
            target = &candidate;
            break;
        }
    }
    if (!target) {
        PPFNode node;
        node.id = static_cast<NodeId>(nodes.size());
        node.payload = payload;
        node.digest = fnv1a(key);
        node.key = std::move(key);
        node.annotation = ann;
        nodes.push_back(std::move(node));
        bucket.push_back(nodes.back().id);
        target = &nodes.back();
    }
    if (std::find(target->members.begin(), target->members.end(), ann) == target->members.end())
        target->members.push_back(ann);
    if (!target->is_leaf() &&
        std::find(target->derivations.begin(), target->derivations.end(), children) == target->derivations.end())
        target->derivations.push_back(children);
    return target->id;
}

void PackedPlanForest::add_root(NodeId id)
{
    auto it = std::lower_bound(roots.begin(), roots.end(), id);
    if (it == roots.end() || *it != id)
        roots.insert(it, id);
}

std::size_t PackedPlanForest::num_edges() const
{
    std::size_t total = 0;
    for (const auto &n : nodes) {
        std::set<NodeId> kids;
        for (const auto &d : n.derivations)
            kids.insert(d.begin(), d.end());
        total += kids.size();
    }
    return total;
}

std::size_t PackedPlanForest::max_arity() const
{
    std::size_t d = 0;
    for (const auto &n : nodes)
        d = std::max(d, n.arity());
    return d;
}

std::vector<NodeId> PackedPlanForest::topological_order() const
{
    std::vector<std::size_t> pending(nodes.size(), 0);
    std::vector<std::vector<NodeId>> parents(nodes.size());
    for (const auto &n : nodes) {
        std::set<NodeId> kids;
        for (const auto &d : n.derivations)
            kids.insert(d.begin(), d.end());
        pending[static_cast<std::size_t>(n.id)] = kids.size();
        for (NodeId c : kids)
            parents[static_cast<std::size_t>(c)].push_back(n.id);
    }
    std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
    for (const auto &n : nodes)
        if (pending[static_cast<std::size_t>(n.id)] == 0)
            ready.push(n.id);
    std::vector<NodeId> order;
    order.reserve(nodes.size());
    while (!ready.empty()) {
        NodeId id = ready.top();
        ready.pop();
        order.push_back(id);
        for (NodeId p : parents[static_cast<std::size_t>(id)])
            if (--pending[static_cast<std::size_t>(p)] == 0)
                ready.push(p);
    }
    if (order.size() != nodes.size())
        throw CycleError(kNoNode, kNoNode);
    return order;
}

void PackedPlanForest::compact()
{
    std::vector<bool> keep(nodes.size(), false);
    std::vector<NodeId> stack(roots.begin(), roots.end());
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        if (keep[static_cast<std::size_t>(id)])
            continue;
        keep[static_cast<std::size_t>(id)] = true;
        for (const auto &d : nodes[static_cast<std::size_t>(id)].derivations)
            for (NodeId c : d)
                stack.push_back(c);
    }
    std::vector<NodeId> remap(nodes.size(), kNoNode);
    std::vector<PPFNode> kept;
    for (auto &n : nodes) {
        if (!keep[static_cast<std::size_t>(n.id)])
            continue;
        remap[static_cast<std::size_t>(n.id)] = static_cast<NodeId>(kept.size());
        kept.push_back(std::move(n));
    }
    for (auto &n : kept) {
        n.id = remap[static_cast<std::size_t>(n.id)];
        for (auto &d : n.derivations)
            for (NodeId &c : d)
                c = remap[static_cast<std::size_t>(c)];
    }
    for (NodeId &r : roots)
        r = remap[static_cast<std::size_t>(r)];
    nodes = std::move(kept);
    reindex();
}

void PackedPlanForest::reindex()
{
    index_.clear();
    for (const auto &n : nodes)
        index_[n.key].push_back(n.id);
}

bool PackedPlanForest::operator==(const PackedPlanForest &other) const
{
    if (nodes.size() != other.nodes.size() || roots != other.roots || pruned_witnesses != other.pruned_witnesses)
        return false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto &a = nodes[i];
        const auto &b = other.nodes[i];
        if (a.id != b.id || a.payload != b.payload || a.key != b.key || a.annotation != b.annotation ||
            a.members != b.members || a.derivations != b.derivations)
            return false;
    }
    return true;
}

/*======================================================================================================================
 * Stats
 *====================================================================================================================*/

void SizeStats::finalize()
{
    nodes_per_plan = num_plans ? static_cast<double>(total_nodes) / static_cast<double>(num_plans) : 0.0;
    double denom = static_cast<double>(total_nodes);
    packed_ratio_pre = denom > 0 ? static_cast<double>(unique_all) / denom : 0.0;
    packed_ratio_post = denom > 0 ? static_cast<double>(unique_feasible) / denom : 0.0;
    pruned_unique = unique_all >= unique_feasible ? unique_all - unique_feasible : 0;
}

bool SizeStats::within_size_bounds(std::size_t forest_nodes) const
{
    const double a = static_cast<double>(num_annotations);
    const double base = static_cast<double>(n) * static_cast<double>(k);
    return static_cast<double>(forest_nodes) <= base * a &&
           static_cast<double>(num_edges) <= base * static_cast<double>(d) * a * a;
}

/*======================================================================================================================
 * Build
 *====================================================================================================================*/

BuildResult build(const CandidateSource &next, const Catalog &catalog, const BuildOptions &opts)
{
    const auto start = std::chrono::steady_clock::now();
    BuildResult result;
    PackedPlanForest shadow;
    std::unordered_set<std::string> annotation_space;
    std::unordered_set<std::string> seen_certificates;
    std::size_t max_plan = 0;

    while (!opts.limit || result.stats.num_plans < *opts.limit) {
        auto candidate = next();
        if (!candidate)
            break;
        ++result.stats.num_plans;
        Plan plan = std::move(candidate->plan);
        bind_leaf_kinds(plan, catalog);
        result.stats.total_nodes += plan.nodes.size();
        max_plan = std::max(max_plan, plan.nodes.size());

        if (!candidate->report.structural.empty()) {
            const auto &err = candidate->report.structural.front();
            Witness w;
            w.family = ConstraintFamily::TYPE;
            w.at_operator = err.node;
            w.evidence.push_back({"structure", "well-formed plan", err.detail});
            result.forest.pruned_witnesses.emplace_back(candidate->index, w);
            continue;
        }

        std::map<NodeId, AnnotationVector> anns;
        std::map<NodeId, NodeId> shadow_id, forest_id;
        std::set<NodeId> dead;
        for (NodeId id : topological_order(plan)) {
            const PlanNode &node = plan.at(id);
            std::vector<const AnnotationVector *> kids;
            std::vector<NodeId> shadow_kids;
            for (NodeId c : node.children) {
                kids.push_back(&anns.at(c));
                shadow_kids.push_back(shadow_id.at(c));
            }
            AnnotationVector ann = node.is_leaf() ? derive_leaf_annotation(node.leaf(), catalog)
                                                  : derive_annotation(node.op(), kids, catalog);
            annotation_space.insert(ann.canonical());
            shadow_id[id] = shadow.lookup_or_create(node.payload, ann, shadow_kids);

            if (opts.prune) {
                bool blocked = std::any_of(node.children.begin(), node.children.end(),
                                           [&](NodeId c) { return dead.contains(c); });
                if (blocked) {
                    dead.insert(id);
                } else if (auto w = node.is_leaf() ? check_local(ann, kids, id) : check_local(node.op(), ann, kids, id)) {
                    dead.insert(id);
                    result.forest.pruned_witnesses.emplace_back(candidate->index, *w);
                    if (opts.minimize) {
                        // identical sub-DAG and witness → identical certificate
                        Plan below;
                        for (NodeId d : plan.descendants(id))
                            below.nodes[d] = plan.at(d);
                        std::string fingerprint = write_plan(below) + describe(*w) + std::to_string(id);
                        if (seen_certificates.insert(fingerprint).second) {
                            Certificate cert = minimal_certificate(plan, *w, catalog);
                            cert.plan_index = candidate->index;
                            result.certificates.push_back(std::move(cert));
                        }
                    }
                } else {
                    std::vector<NodeId> forest_kids;
                    for (NodeId c : node.children)
                        forest_kids.push_back(forest_id.at(c));
                    forest_id[id] = result.forest.lookup_or_create(node.payload, ann, forest_kids);
                }
            }
            anns.emplace(id, std::move(ann));
        }
        for (NodeId r : plan.roots)
            shadow.add_root(shadow_id.at(r));
        if (opts.prune && dead.empty()) {
            ++result.stats.surviving_plans;
            for (NodeId r : plan.roots)
                result.forest.add_root(forest_id.at(r));
        }
    }

    if (opts.prune) {
        result.forest.compact();
    } else {
        result.stats.surviving_plans = result.stats.num_plans;
        result.forest = std::move(shadow);
        shadow = result.forest;
    }

    SizeStats &s = result.stats;
    s.unique_all = shadow.size();
    s.unique_feasible = result.forest.size();
    s.n = max_plan;
    s.k = opts.alternatives.value_or(s.num_plans);
    s.d = shadow.max_arity();
    s.num_annotations = annotation_space.size();
    s.num_edges = shadow.num_edges();
    s.finalize();
    s.build_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    s.peak_mem_kb = peak_rss_kb();
    return result;
}

BuildResult build(const AmbiguousQuerySpec &spec, const Catalog &catalog, const BuildOptions &opts)
{
    PlanExpander expander(spec, opts.limit);
    BuildOptions o = opts;
    if (!o.alternatives) {
        std::size_t k = 1;
        for (const auto &cp : spec.choice_points)
            k = std::max(k, cp.alternatives.size());
        o.alternatives = spec.choice_points.empty() ? 1 : k;
    }
    return build([&] { return expander.next(); }, catalog, o);
}

BuildResult build(const std::vector<Plan> &plans, const Catalog &catalog, const BuildOptions &opts)
{
    std::size_t i = 0;
    return build(
        [&]() -> std::optional<Candidate> {
            if (i >= plans.size())
                return std::nullopt;
            Candidate c;
            c.index = i;
            c.plan = plans[i++];
            c.report = validate_signature(c.plan);
            return c;
        },
        catalog, opts);
}

/*======================================================================================================================
 * Unpacking
 *====================================================================================================================*/

namespace {

class Unpacker
{
  public:
    Unpacker(const PackedPlanForest &forest, std::optional<std::size_t> limit, const DerivationFilter &filter)
        : forest_(forest), limit_(limit), filter_(filter)
    { }

    void run(NodeId root, UnpackResult &out)
    {
        out_ = &out;
        root_ = root;
        choice_.clear();
        std::vector<NodeId> frontier{root};
        descend(frontier);
    }

  private:
    std::vector<std::size_t> allowed(NodeId id) const
    {
        const PPFNode &n = forest_.at(id);
        if (filter_)
            return filter_(id);
        if (n.is_leaf())
            return {0};
        std::vector<std::size_t> all(n.derivations.size());
        for (std::size_t i = 0; i < all.size(); ++i)
            all[i] = i;
        return all;
    }

    bool full() const { return limit_ && out_->plans.size() >= *limit_; }

    void descend(std::vector<NodeId> frontier)
    {
        while (!frontier.empty() && choice_.contains(frontier.back()))
            frontier.pop_back();
        if (frontier.empty()) {
            emit();
            return;
        }
        const NodeId id = frontier.back();
        frontier.pop_back();
        const PPFNode &n = forest_.at(id);
        for (std::size_t d : allowed(id)) {
            if (full()) {
                out_->truncated = true;
                return;
            }
            choice_[id] = d;
            std::vector<NodeId> next = frontier;
            if (!n.is_leaf()) {
                const auto &kids = n.derivations.at(d);
                for (auto it = kids.rbegin(); it != kids.rend(); ++it)
                    next.push_back(*it);
            }
            descend(std::move(next));
            choice_.erase(id);
        }
    }

    void emit()
    {
        if (full()) {
            out_->truncated = true;
            return;
        }
        Plan plan;
        for (const auto &[id, d] : choice_) {
            const PPFNode &n = forest_.at(id);
            PlanNode pn;
            pn.id = id;
            pn.payload = n.payload;
            if (!n.is_leaf())
                pn.children = n.derivations.at(d);
            plan.nodes[id] = std::move(pn);
        }
        plan.roots = {root_};
        out_->plans.push_back(std::move(plan));
    }

    const PackedPlanForest &forest_;
    std::optional<std::size_t> limit_;
    const DerivationFilter &filter_;
    UnpackResult *out_ = nullptr;
    NodeId root_ = kNoNode;
    std::map<NodeId, std::size_t> choice_;
};

}

UnpackResult unpack(const PackedPlanForest &forest, std::optional<std::size_t> limit, const DerivationFilter &filter)
{
    UnpackResult out;
    Unpacker unpacker(forest, limit, filter);
    for (NodeId r : forest.roots) {
        unpacker.run(r, out);
        if (out.truncated)
            break;
    }
    return out;
}

}
