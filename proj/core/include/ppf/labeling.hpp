#pragma once

#include <ppf/forest.hpp>

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <vector>

namespace ppf {

/// One explanation for pruned labels. Only failures caused by a check itself are logged ("direct"); labels that die
/// because an input has no surviving labels are not re-explained.
struct LabelLogEntry
{
    NodeId node = kNoNode;
    std::size_t label = 0;        ///< member index within the node's annotation class
    Witness witness;
};

/// Label sets L(n) ⊆ Λ(n), where Λ(n) are the node's annotation-class members.
struct Labeling
{
    std::vector<std::vector<bool>> alive;               ///< per node, per member
    std::vector<std::vector<std::size_t>> supported;    ///< derivations supporting some surviving label
    std::vector<LabelLogEntry> log;                     ///< at most one entry per (node, family)
    std::size_t sweeps = 0;                             ///< includes the final sweep that changed nothing
    std::vector<std::size_t> mass;                      ///< Σ|L(n)| before the first sweep and after each sweep

    std::size_t count(NodeId n) const;
    bool empty(NodeId n) const { return count(n) == 0; }
    std::size_t total() const;
};

struct LabelOptions
{
    /// Sweep along a seeded random valid children-first order instead of the canonical one.
    std::optional<std::uint64_t> order_seed;
};

/// Fixed-point labeling: λ at n survives iff the operator-only families pass on λ and some derivation offers, at every
/// input slot, a surviving child label compatible with λ under the edge families.
Labeling label(const PackedPlanForest &forest, const Catalog &catalog, const LabelOptions &opts = {});

struct FeasibilityVerdict
{
    bool feasible = true;
    std::vector<NodeId> infeasible_roots;
    std::vector<Certificate> certificates;              ///< one per independent direct failure, deduplicated
};

/// Feasible iff every root keeps a label. Otherwise each empty root yields certificates for the directly failing
/// nodes beneath it, minimized over the sub-DAG obtained by following first derivations. Throws
/// std::invalid_argument when the labels do not belong to the forest.
FeasibilityVerdict is_feasible(const PackedPlanForest &forest, const Labeling &labels, const Catalog &catalog);

/// The sub-DAG below `from` with its `derivation`-th child tuple at `from` and first derivations elsewhere; forest ids
/// become plan ids. Verdict certificates refer to the plan built this way for the first derivation that reproduces
/// their witness.
Plan derivation_plan(const PackedPlanForest &forest, NodeId from, std::size_t derivation = 0);

/// Unpacks only through surviving nodes and supporting derivations.
UnpackResult extract_feasible(const PackedPlanForest &forest, const Labeling &labels,
                              std::optional<std::size_t> limit = std::nullopt);

nlohmann::json verdict_to_json(const FeasibilityVerdict &verdict, const PackedPlanForest &forest,
                               const Labeling &labels);

}
